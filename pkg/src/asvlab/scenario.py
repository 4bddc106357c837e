"""Stochastic path-with-obstacles scenarios and their file format."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath

import numpy as np

from .fileio import atomic_write_text
from .geometry import Path
from .sampling import Sampler

SCENARIO_FORMAT = "asvlab-scenario"
SCENARIO_VERSION = 1


class ScenarioFileError(ValueError):
    pass


class UnsupportedVersionError(ScenarioFileError):
    pass


@dataclass(frozen=True)
class GenParams:
    N_o: int = 20
    N_w_range: tuple = (2, 5)
    L_p: float = 400.0
    mu_r: float = 30.0
    sigma_d: float = 150.0
    endpoint_clearance: float = 8.0  # extra gap kept around p_start/p_end (2 x vessel width)

    def __post_init__(self):
        lo, hi = self.N_w_range
        object.__setattr__(self, "N_w_range", (int(lo), int(hi)))
        if self.N_o < 0 or lo < 0 or hi < lo:
            raise ValueError(f"invalid counts in {self}")
        if not (self.L_p > 0 and self.mu_r > 0 and self.sigma_d > 0 and self.endpoint_clearance >= 0):
            raise ValueError(f"scenario parameters must be positive: {self}")

    def to_dict(self):
        d = asdict(self)
        d["N_w_range"] = list(self.N_w_range)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "N_w_range" in d:
            d["N_w_range"] = tuple(d["N_w_range"])
        return cls(**d)


DESK_PARAMS = GenParams(N_o=6, L_p=200.0, mu_r=15.0)


@dataclass(frozen=True)
class Obstacle:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")


@dataclass(eq=False)
class Scenario:
    path: Path
    obstacles: list
    p_start: np.ndarray
    p_end: np.ndarray
    seed: int | None = None
    gen_params: GenParams | None = None
    placements: list = field(default_factory=list)  # (omega_bar, lateral offset) per obstacle
    name: str | None = None

    def obstacle_arrays(self):
        """(K, 2) centers and (K,) radii."""
        if not self.obstacles:
            return np.zeros((0, 2)), np.zeros(0)
        return (np.array([o.center for o in self.obstacles]), np.array([o.radius for o in self.obstacles]))

    def to_dict(self):
        return {
            "format": SCENARIO_FORMAT,
            "version": SCENARIO_VERSION,
            "name": self.name,
            "seed": self.seed,
            "gen_params": None if self.gen_params is None else self.gen_params.to_dict(),
            "p_start": [float(c) for c in self.p_start],
            "p_end": [float(c) for c in self.p_end],
            "waypoints": self.path.waypoints.tolist(),
            "obstacles": [[o.center[0], o.center[1], o.radius] for o in self.obstacles],
            "placements": [[float(w), float(d)] for w, d in self.placements],
        }

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.to_dict() == other.to_dict()


def point_on_circle(theta, radius):
    """radius * (cos theta, sin theta), nudged by a few ulps so that
    ``math.hypot`` of the result equals ``radius`` exactly."""
    p = radius * np.array([math.cos(theta), math.sin(theta)])
    if math.hypot(p[0], p[1]) == radius:
        return p
    u = np.spacing(np.abs(p).max())
    for i, j in _NUDGES:
        q = np.array([p[0] + i * u, p[1] + j * u])
        if math.hypot(q[0], q[1]) == radius:
            return q
    return p


_NUDGES = sorted(((i, j) for i in range(-8, 9) for j in range(-8, 9)), key=lambda t: (abs(t[0]) + abs(t[1]), t))


def generate(params=None, seed=0):
    """Random path with obstacles: endpoints on a circle of radius L_p/2, PCHIP
    path through jittered interior waypoints, obstacles scattered about the path
    normal with Poisson radii."""
    params = params or GenParams()
    rng = Sampler(seed)
    L = params.L_p
    theta = rng.uniform(0.0, 2.0 * math.pi)
    p_start = point_on_circle(theta, 0.5 * L)
    p_end = -p_start

    n_w = int(rng.integers(*params.N_w_range))
    jitter = L / 10.0
    wps = [p_start]
    for k in range(1, n_w + 1):
        base = p_start + (k / (n_w + 1)) * (p_end - p_start)
        wps.append(base + rng.gaussian(0.0, jitter, size=2))
    wps.append(p_end)
    path = Path(np.array(wps))

    obstacles, placements = [], []
    while len(obstacles) < params.N_o:
        w = rng.uniform(0.1 * L, 0.9 * L)
        d = rng.gaussian(0.0, params.sigma_d)
        gamma = path.tangent_angle(w)
        center = path.point(w) + d * np.array([math.cos(gamma - math.pi / 2), math.sin(gamma - math.pi / 2)])
        r = 0
        while r == 0:
            r = int(rng.poisson(params.mu_r))
        guard = r + params.endpoint_clearance
        if np.hypot(*(center - p_start)) <= guard or np.hypot(*(center - p_end)) <= guard:
            continue
        obstacles.append(Obstacle(tuple(center), float(r)))
        placements.append((float(w), float(d)))
    return Scenario(path, obstacles, p_start, p_end, seed=int(seed), gen_params=params, placements=placements)


def _require(doc, key, kind):
    if key not in doc:
        raise ScenarioFileError(f"missing field {key!r}")
    val = doc[key]
    if kind is not None and not isinstance(val, kind):
        raise ScenarioFileError(f"field {key!r} has wrong type {type(val).__name__}")
    return val


def _vec2(val, where):
    if not (isinstance(val, list) and len(val) == 2 and all(isinstance(c, (int, float)) for c in val)):
        raise ScenarioFileError(f"{where}: expected [x, y]")
    return np.array(val, dtype=float)


def from_dict(doc):
    if not isinstance(doc, dict):
        raise ScenarioFileError("top-level value must be an object")
    if doc.get("format") != SCENARIO_FORMAT:
        raise ScenarioFileError(f"field 'format': expected {SCENARIO_FORMAT!r}, got {doc.get('format')!r}")
    version = doc.get("version")
    if version != SCENARIO_VERSION:
        raise UnsupportedVersionError(f"unsupported scenario version {version!r} (supported: {SCENARIO_VERSION})")
    p_start = _vec2(_require(doc, "p_start", list), "field 'p_start'")
    p_end = _vec2(_require(doc, "p_end", list), "field 'p_end'")
    wps = _require(doc, "waypoints", list)
    pts = [_vec2(w, f"field 'waypoints'[{i}]") for i, w in enumerate(wps)]
    try:
        path = Path(np.array(pts))
    except ValueError as exc:
        raise ScenarioFileError(f"field 'waypoints': {exc}") from exc
    obstacles = []
    for i, o in enumerate(_require(doc, "obstacles", list)):
        if not (isinstance(o, list) and len(o) == 3 and all(isinstance(c, (int, float)) for c in o)):
            raise ScenarioFileError(f"field 'obstacles'[{i}]: expected [x, y, radius]")
        try:
            obstacles.append(Obstacle((o[0], o[1]), o[2]))
        except ValueError as exc:
            raise ScenarioFileError(f"field 'obstacles'[{i}]: {exc}") from exc
    gp = doc.get("gen_params")
    try:
        gen_params = None if gp is None else GenParams.from_dict(gp)
    except (TypeError, ValueError) as exc:
        raise ScenarioFileError(f"field 'gen_params': {exc}") from exc
    placements = [tuple(p) for p in doc.get("placements", [])]
    seed = doc.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ScenarioFileError("field 'seed' must be an integer or null")
    return Scenario(path, obstacles, p_start, p_end, seed=seed, gen_params=gen_params,
                    placements=placements, name=doc.get("name"))


def dumps(s):
    return json.dumps(s.to_dict(), indent=1) + "\n"


def loads(text, source="<string>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return from_dict(doc)
    except ScenarioFileError as exc:
        raise type(exc)(f"{source}: {exc}") from exc


def save(s, path):
    atomic_write_text(path, dumps(s))


def load(path):
    return loads(FsPath(path).read_text("utf-8"), source=str(path))
