"""Rangefinder suite simulation and per-sector pooling (min, max, feasibility)."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass

import numpy as np

from .sampling import Sampler


@dataclass(frozen=True)
class SensorConfig:
    N: int = 225
    S_s: float = 4.0 * math.pi / 3.0
    S_r: float = 150.0
    d: int = 25
    W: float = 4.0

    def __post_init__(self):
        if self.N < 2 or self.d < 1 or self.N % self.d:
            raise ValueError(f"N={self.N} must be a multiple of d={self.d}")
        if not 0.0 <= self.S_s <= 2.0 * math.pi:
            raise ValueError("sensor span must lie in [0, 2 pi]")
        if not (self.S_r > 0 and self.W > 0):
            raise ValueError("range and vessel width must be positive")

    @property
    def n(self):
        return self.N // self.d

    @property
    def theta(self):
        """Angle between neighbouring rays."""
        return self.S_s / (self.N - 1)

    def angles(self):
        """Vessel-relative ray angles, 0 = bow, increasing with index."""
        return -0.5 * self.S_s + self.theta * np.arange(self.N)


@dataclass(frozen=True, eq=False)
class SensorSweep:
    distances: np.ndarray
    angles: np.ndarray
    inside_obstacle: bool = False


def cast_rays(pose, centers, radii, cfg):
    """Distance along each ray to the nearest circle, clipped to the sensor range.

    ``pose`` is anything with ``x, y, psi`` attributes or an (x, y, psi) triple.
    """
    if hasattr(pose, "psi"):
        x, y, psi = pose.x, pose.y, pose.psi
    else:
        x, y, psi = pose[0], pose[1], pose[2]
    angles = cfg.angles()
    dist = np.full(cfg.N, cfg.S_r)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if len(radii) == 0:
        return SensorSweep(dist, angles)
    rel = centers - np.array([x, y])
    cc = np.einsum("ij,ij->i", rel, rel) - radii * radii
    if np.any(cc <= 0.0):
        return SensorSweep(np.zeros(cfg.N), angles, inside_obstacle=True)
    # skip circles that cannot be reached within range
    near = np.sqrt(np.einsum("ij,ij->i", rel, rel)) - radii < cfg.S_r
    if not np.any(near):
        return SensorSweep(dist, angles)
    rel, cc = rel[near], cc[near]
    phi = psi + angles
    dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    b = dirs @ rel.T  # (N, K) projection of center onto ray
    disc = b * b - cc[None, :]
    hit = (disc >= 0.0) & (b > 0.0)
    t = np.where(hit, b - np.sqrt(np.where(hit, disc, 0.0)), np.inf)
    dist = np.minimum(dist, t.min(axis=1))
    return SensorSweep(dist, angles)


def min_pool(sector):
    return float(min(sector))


def max_pool(sector):
    return float(max(sector))


def feasibility_pool(sector, cfg):
    """Largest distance the vessel can advance through the sector.

    Readings are visited in ascending order; at each level x_i the sector is
    scanned for an opening: a contiguous run of readings farther than x_i.
    A run of L rays spans L arcs of width theta*x_i plus a half arc at each of
    its two ends.  The first level whose widest opening is not wider than the
    vessel is returned.
    """
    x = [float(v) for v in sector]
    theta = cfg.theta
    W = cfg.W
    for i in sorted(range(len(x)), key=x.__getitem__):
        level = x[i]
        arc = theta * level
        y = 0.5 * arc
        found = False
        for xj in x:
            if xj > level:
                y += arc
                if y + 0.5 * arc > W:
                    found = True
                    break
            else:
                y = 0.5 * arc
        if not found:
            return level
    return cfg.S_r


def _feasibility_sectors(X, cfg):
    """Vectorized feasibility pooling over rows of X, shape (m, n)."""
    m, n = X.shape
    levels = X  # candidate level per (row, i)
    free = X[:, None, :] > levels[:, :, None]  # (m, level i, reading j)
    run = np.zeros((m, n), dtype=np.int64)
    best = np.zeros((m, n), dtype=np.int64)
    for j in range(n):
        run = np.where(free[:, :, j], run + 1, 0)
        np.maximum(best, run, out=best)
    width = (best + 1) * (cfg.theta * levels)
    feasible = (best > 0) & (width > cfg.W)
    cand = np.where(feasible, np.inf, levels)
    out = cand.min(axis=1)
    return np.where(np.isfinite(out), out, cfg.S_r)


def sectors(distances, cfg):
    return np.asarray(distances, dtype=float).reshape(cfg.d, cfg.n)


def pool_all(sweep, method, cfg):
    """Reduce a sweep to ``cfg.d`` sector values."""
    dist = sweep.distances if isinstance(sweep, SensorSweep) else sweep
    X = sectors(dist, cfg)
    if method == "min":
        return X.min(axis=1)
    if method == "max":
        return X.max(axis=1)
    if method == "feasibility":
        return _feasibility_sectors(X, cfg)
    raise ValueError(f"unknown pooling method {method!r}")


POOLING_METHODS = ("min", "max", "feasibility")


def robustness_metric(distances, sigma_w, trials, method, cfg, seed=0):
    """RMS deviation of pooled outputs under additive Gaussian sensor noise."""
    clean = pool_all(np.asarray(distances, dtype=float), method, cfg)
    if sigma_w == 0:
        return 0.0
    rng = Sampler(seed)
    sq = 0.0
    count = 0
    for _ in range(trials):
        noisy = np.asarray(distances, dtype=float) + rng.gaussian(0.0, sigma_w, size=cfg.N)
        noisy = np.clip(noisy, 0.0, cfg.S_r)
        diff = pool_all(noisy, method, cfg) - clean
        sq += float(diff @ diff)
        count += diff.size
    return math.sqrt(sq / count)


def _bench_sector(n, rng, cfg, scene):
    if scene == "random":
        return rng.uniform(0.0, cfg.S_r, size=n)
    if scene == "ramp":
        # ascending readings: every level but the last has an opening, found
        # only after scanning past all nearer rays -> quadratic work
        base = np.linspace(2.0 / 3.0 * cfg.S_r, cfg.S_r, n)
        return np.minimum(base + rng.uniform(0.0, 1e-3, size=n), cfg.S_r)
    raise ValueError(f"unknown bench scene {scene!r}")


def pooling_bench(n, method, repeats=2000, seed=0, cfg=None, scene="random"):
    """Mean and std of per-sector latency in ns for the scalar pooling routines.

    ``scene`` is ``"random"`` (readings uniform over the range) or ``"ramp"``
    (worst case for feasibility pooling).
    """
    cfg = cfg or SensorConfig()
    rng = Sampler(seed)
    data = [_bench_sector(n, rng, cfg, scene).tolist() for _ in range(repeats)]
    if method == "min":
        fn = min_pool
    elif method == "max":
        fn = max_pool
    elif method == "feasibility":
        def fn(s):
            return feasibility_pool(s, cfg)
    else:
        raise ValueError(f"unknown pooling method {method!r}")
    times = np.empty(repeats)
    clock = time.perf_counter_ns
    for k, s in enumerate(data):
        t0 = clock()
        fn(s)
        times[k] = clock() - t0
    return float(times.mean()), float(times.std())


def bench_csv(rows):
    """CSV text for bench rows (method, n, mean_ns, std_ns)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "n", "mean_ns", "std_ns"])
    for row in rows:
        w.writerow([row[0], row[1], f"{row[2]:.1f}", f"{row[3]:.1f}"])
    return buf.getvalue()
