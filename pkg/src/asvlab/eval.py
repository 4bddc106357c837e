"""Lambda-sweep evaluation, fixed qualitative scenarios, trend-model curve fits."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from . import scenario as scen
from .env import TRACE_COLUMNS, ASVEnv, EnvConfig
from .fileio import atomic_write_text
from .geometry import Path
from .sampling import Sampler


@dataclass(frozen=True)
class EpisodeRecord:
    scenario_seed: int | None
    reason: str
    steps: int
    abs_cte_sum: float
    total_reward: float


@dataclass
class EvalReport:
    lam: float
    episodes: int
    success_rate: float
    avg_cross_track_error: float
    avg_cross_track_error_success: float
    avg_episode_length: float
    ci_low: float
    ci_high: float
    records: list = field(default_factory=list)


def wilson_interval(successes, n, z=1.959963984540054):
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def summarize(lam, records, h):
    n = len(records)
    goals = [r for r in records if r.reason == "goal"]
    total_steps = sum(r.steps for r in records)
    succ_steps = sum(r.steps for r in goals)
    lo, hi = wilson_interval(len(goals), n)
    return EvalReport(
        lam=float(lam),
        episodes=n,
        success_rate=len(goals) / n if n else math.nan,
        avg_cross_track_error=sum(r.abs_cte_sum for r in records) / total_steps if total_steps else math.nan,
        avg_cross_track_error_success=sum(r.abs_cte_sum for r in goals) / succ_steps if succ_steps else math.nan,
        avg_episode_length=float(np.mean([r.steps for r in records])) * h if n else math.nan,
        ci_low=lo,
        ci_high=hi,
        records=list(records),
    )


def episode_seeds(seed, n):
    return [int(Sampler(seed, k).integers(0, 2**62)) for k in range(n)]


def run_episode(agent, env, scenario, lam):
    obs = env.reset(scenario=scenario, lam=lam)
    cte = 0.0
    ret = 0.0
    while True:
        res = env.step(agent.mean_action(obs))
        obs = res.observation
        cte += abs(res.info["cross_track_error"])
        ret += res.reward
        if res.done:
            return res.termination_reason, env.steps, cte, ret


def run_eval(agent, lam, n_episodes, seed=0, env_config=None):
    """Deterministic (mean-action) rollouts on freshly generated scenarios.

    Episode k uses the same scenario for every lambda given the same seed,
    so sweeps compare policies on common scenarios.
    """
    cfg = env_config or EnvConfig()
    env = ASVEnv(cfg, seed=seed)
    records = []
    for s in episode_seeds(seed, n_episodes):
        sc = scen.generate(cfg.gen_params, s)
        reason, steps, cte, ret = run_episode(agent, env, sc, lam)
        records.append(EpisodeRecord(s, reason, steps, cte, ret))
    return summarize(lam, records, cfg.h)


REPORT_COLUMNS = ("lambda", "episodes", "success_rate", "avg_cte_m", "avg_len_s",
                  "ci_low", "ci_high", "avg_cte_success_m")


def report_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        vals = (r.success_rate, r.avg_cross_track_error, r.avg_episode_length, r.ci_low, r.ci_high,
                r.avg_cross_track_error_success)
        w.writerow([repr(float(r.lam)), r.episodes] + [repr(float(v)) for v in vals])
    return buf.getvalue()


def read_report_csv(path):
    """Rows of the sweep report as dicts of floats."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames[:5]) != REPORT_COLUMNS[:5]:
            raise ValueError(f"{path}: not an evaluation report")
        return [{k: float(v) for k, v in row.items()} for row in reader]


def trace_csv(trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in trace:
        w.writerow([repr(float(x)) for x in row[:-1]] + [row[-1]])
    return buf.getvalue()


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise ValueError(f"{path}: not a trajectory trace")
    return [tuple(float(x) for x in r[:-1]) + (r[-1],) for r in rows[1:]]


def emit_plots(out_dir, reports=(), traces=None, fits=(), scenarios=None):
    """Write plot-ready CSV files; returns the list of paths written."""
    out = FsPath(out_dir)
    written = []
    if reports is not None:
        atomic_write_text(out / "sweep.csv", report_csv(reports))
        written.append(out / "sweep.csv")
    for name, trace in (traces or {}).items():
        p = out / f"trajectory_{name}.csv"
        atomic_write_text(p, trace_csv(trace))
        written.append(p)
    for name, sc in (scenarios or {}).items():
        p = out / f"scene_{name}.csv"
        atomic_write_text(p, scene_csv(sc))
        written.append(p)
    if fits:
        atomic_write_text(out / "fits.csv", fits_csv(fits))
        written.append(out / "fits.csv")
        lams = np.logspace(-6, 0, 61)
        for f in fits:
            p = out / f"fit_curve_{f.model}.csv"
            atomic_write_text(p, fit_curve_csv(f, lams))
            written.append(p)
    return written


def scene_csv(sc, samples=400):
    """Path polyline and obstacle circles of a scenario, one record per line."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("kind", "x", "y", "radius"))
    for p in sc.path.points(np.linspace(0.0, sc.path.length, samples)):
        w.writerow(("path", repr(float(p[0])), repr(float(p[1])), ""))
    for o in sc.obstacles:
        w.writerow(("obstacle", repr(o.center[0]), repr(o.center[1]), repr(o.radius)))
    return buf.getvalue()


# -- qualitative scenarios -------------------------------------------------

BUILTIN_SCENARIO_VERSION = 1


def _straight_path(length=400.0):
    half = 0.5 * length
    return np.array([[-half, 0.0], [0.0, 0.0], [half, 0.0]])


def _scenario(name, wps, obstacles):
    path = Path(wps)
    return scen.Scenario(path, [scen.Obstacle((x, y), r) for x, y, r in obstacles],
                         np.array(wps[0]), np.array(wps[-1]), name=f"{name}-v{BUILTIN_SCENARIO_VERSION}")


def builtin_scenarios():
    """Four fixed archetypes keyed A-D.

    A: one obstacle sitting on the path.  B: a cluster well off the path.
    C: a wall across the path with a single gap.  D: a dead-end pocket the
    path runs into.
    """
    wps = _straight_path()
    a = [(0.0, 0.5, 20.0)]
    b = [(-60.0, 60.0, 15.0), (0.0, 80.0, 20.0), (45.0, 55.0, 12.0), (70.0, -70.0, 15.0)]
    c = [(50.0, y, 10.0) for y in range(-130, 20, 20)] + [(50.0, y, 10.0) for y in range(60, 140, 20)]
    d = ([(60.0, y, 10.0) for y in range(-40, 41, 16)]
         + [(x, 40.0, 10.0) for x in range(0, 60, 16)]
         + [(x, -40.0, 10.0) for x in range(0, 60, 16)])
    return {
        "A": _scenario("A", wps, a),
        "B": _scenario("B", wps, b),
        "C": _scenario("C", wps, c),
        "D": _scenario("D", wps, d),
    }


# -- curve fitting -----------------------------------------------------------

class FitError(ValueError):
    pass


def _logistic(p, x):
    a, b = p
    q = x ** b
    f = a + (1.0 - a) / (1.0 + q)
    ja = 1.0 - 1.0 / (1.0 + q)
    jb = -(1.0 - a) * q * np.log(x) / (1.0 + q) ** 2
    return f, np.column_stack([ja, jb])


def _power(p, x):
    a, b, c = p
    q = x ** (-c)
    f = a + b * q
    return f, np.column_stack([np.ones_like(x), q, -b * q * np.log(x)])


def _loglinear(p, x):
    a, b = p
    lg = np.log10(x)
    return a - b * lg, np.column_stack([np.ones_like(x), -lg])


MODELS = {
    "logistic-success": (_logistic, ("a", "b"), "success_rate"),
    "power-cte": (_power, ("a", "b", "c"), "avg_cte_m"),
    "loglinear-length": (_loglinear, ("a", "b"), "avg_len_s"),
}


@dataclass
class FitResult:
    model: str
    params: dict
    residual_norm: float
    iterations: int
    converged: bool
    excluded: tuple = ()

    def predict(self, x):
        fn = MODELS[self.model][0]
        return fn(np.array([self.params[k] for k in MODELS[self.model][1]]), np.asarray(x, dtype=float))[0]


def _initial_guess(model, x, y):
    """Exact linear least squares in the linear parameters over a grid of the
    nonlinear one (the loglinear model is linear outright)."""
    if model == "loglinear-length":
        A = np.column_stack([np.ones_like(x), -np.log10(x)])
        return np.linalg.lstsq(A, y, rcond=None)[0]
    best = None
    for k in np.linspace(0.01, 3.0, 300):
        if model == "logistic-success":
            g = 1.0 / (1.0 + x ** k)
            A = (1.0 - g)[:, None]
            coef = np.linalg.lstsq(A, y - g, rcond=None)[0]
            p = np.array([coef[0], k])
            fn = _logistic
        else:
            A = np.column_stack([np.ones_like(x), x ** (-k)])
            coef = np.linalg.lstsq(A, y, rcond=None)[0]
            p = np.array([coef[0], coef[1], k])
            fn = _power
        r = fn(p, x)[0] - y
        cost = float(r @ r)
        if best is None or cost < best[0]:
            best = (cost, p)
    return best[1]


def lm_fit(model, x, y, exclude=(), p0=None, max_iter=500, gtol=1e-8, xtol=1e-10):
    """Levenberg-Marquardt least squares with Marquardt diagonal scaling."""
    if model not in MODELS:
        raise FitError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
    fn, names, _ = MODELS[model]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.ones(len(x), dtype=bool)
    for i in exclude:
        keep[i] = False
    x, y = x[keep], y[keep]
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if np.any(x <= 0):
        raise FitError("lambda values must be positive")
    if len(x) < len(names):
        raise FitError(f"{model} needs at least {len(names)} points, got {len(x)}")

    p = np.asarray(p0, dtype=float) if p0 is not None else _initial_guess(model, x, y)
    f, J = fn(p, x)
    r = f - y
    cost = float(r @ r)
    mu = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = J.T @ r
        if np.max(np.abs(g)) < gtol:
            converged = True
            break
        JtJ = J.T @ J
        diag = np.maximum(np.diag(JtJ), 1e-300)
        accepted = False
        while mu < 1e16:
            step = np.linalg.solve(JtJ + mu * np.diag(diag), -g)
            p_new = p + step
            f_new, J_new = fn(p_new, x)
            r_new = f_new - y
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            break
        small = np.linalg.norm(step) < xtol * (np.linalg.norm(p) + xtol)
        p, f, J, r, cost = p_new, f_new, J_new, r_new, cost_new
        mu = max(mu / 10.0, 1e-12)
        if small:
            converged = True
            break
    return FitResult(model, dict(zip(names, map(float, p))), math.sqrt(cost), it, converged,
                     tuple(sorted(int(i) for i in exclude)))


def fit_report(model, rows, exclude=()):
    column = MODELS[model][2]
    x = [r["lambda"] for r in rows]
    y = [r[column] for r in rows]
    return lm_fit(model, x, y, exclude=exclude)


def fits_csv(fits):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("model", "a", "b", "c", "residual_norm", "iterations", "converged", "excluded"))
    for f in fits:
        vals = [repr(f.params[k]) if k in f.params else "" for k in ("a", "b", "c")]
        w.writerow([f.model] + vals + [repr(f.residual_norm), f.iterations, int(f.converged),
                                       " ".join(map(str, f.excluded))])
    return buf.getvalue()


def fit_curve_csv(fit, lambdas):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("lambda", "fitted"))
    for lam, v in zip(lambdas, fit.predict(lambdas)):
        w.writerow((repr(float(lam)), repr(float(v))))
    return buf.getvalue()
