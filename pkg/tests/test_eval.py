import math

import numpy as np
import pytest
from scipy import optimize, stats

from asvlab import eval as ev
from asvlab import scenario as scen
from asvlab.env import ASVEnv, EnvConfig
from asvlab.geometry import tracking_errors

GRID = np.logspace(-6, 0, 61)
TRUE = {
    "logistic-success": {"a": 0.705, "b": 0.614},
    "power-cte": {"a": -4.44, "b": 26.1, "c": 0.086},
    "loglinear-length": {"a": 329.0, "b": 15.3},
}


def truth(model, x):
    return ev.FitResult(model, TRUE[model], 0.0, 0, True).predict(x)


class LOSAgent:
    """Scripted path follower with the agent interface used by the evaluator."""

    def mean_action(self, obs):
        err = obs[4] - math.atan(obs[5] / 20.0)
        return np.array([1400.0, float(np.clip(3000.0 * err - 20000.0 * obs[2], -2700, 2700))])


@pytest.mark.parametrize("model", sorted(TRUE))
def test_noiseless_recovery(model):
    fit = ev.lm_fit(model, GRID, truth(model, GRID))
    assert fit.converged
    for k, v in TRUE[model].items():
        assert abs(fit.params[k] - v) <= 1e-6 * abs(v)


@pytest.mark.parametrize("model", sorted(TRUE))
def test_agrees_with_scipy_on_noisy_data(model):
    rng = np.random.default_rng(3)
    y = truth(model, GRID) * (1 + 0.01 * rng.standard_normal(len(GRID)))
    fit = ev.lm_fit(model, GRID, y)
    fn, names, _ = ev.MODELS[model]
    ref, _ = optimize.curve_fit(lambda x, *p: fn(np.array(p), x)[0], GRID, y,
                                p0=[TRUE[model][k] for k in names], maxfev=20000)
    mine = np.array([fit.params[k] for k in names])
    assert np.allclose(mine, ref, rtol=1e-4)


def test_loglinear_is_one_step():
    fit = ev.lm_fit("loglinear-length", GRID, truth("loglinear-length", GRID))
    assert fit.iterations == 1 and fit.residual_norm < 1e-9


def test_exclude_drops_outlier():
    y = truth("loglinear-length", GRID).copy()
    y[0] = 10.0
    fit = ev.lm_fit("loglinear-length", GRID, y, exclude=[0])
    assert fit.params["b"] == pytest.approx(15.3, rel=1e-9)
    assert fit.excluded == (0,)
    assert ev.lm_fit("loglinear-length", GRID, y).params["b"] != pytest.approx(15.3, rel=1e-3)


def test_far_start_converges():
    model = "power-cte"
    fit = ev.lm_fit(model, GRID, truth(model, GRID), p0=[0.0, 1.0, 0.5])
    assert fit.params["c"] == pytest.approx(0.086, rel=1e-6)


def test_fit_errors():
    with pytest.raises(ev.FitError):
        ev.lm_fit("cubic", GRID, GRID)
    with pytest.raises(ev.FitError):
        ev.lm_fit("power-cte", GRID[:2], GRID[:2])
    with pytest.raises(ev.FitError):
        ev.lm_fit("loglinear-length", [0.0, 0.1, 1.0], [1, 2, 3])


def test_wilson_matches_scipy():
    for k, n in ((0, 10), (3, 10), (10, 10), (37, 50)):
        ci = stats.binomtest(k, n).proportion_ci(method="wilson")
        lo, hi = ev.wilson_interval(k, n)
        assert lo == pytest.approx(ci.low, abs=1e-12) and hi == pytest.approx(ci.high, abs=1e-12)


def test_summarize():
    recs = [ev.EpisodeRecord(1, "goal", 10, 20.0, 5.0), ev.EpisodeRecord(2, "collision", 30, 90.0, -900.0)]
    r = ev.summarize(0.1, recs, 0.14)
    assert r.success_rate == 0.5 and r.episodes == 2
    assert r.avg_cross_track_error == pytest.approx(110.0 / 40)
    assert r.avg_cross_track_error_success == pytest.approx(2.0)
    assert r.avg_episode_length == pytest.approx(20 * 0.14)


def test_report_and_trace_round_trip(tmp_path):
    recs = [ev.EpisodeRecord(1, "goal", 10, 20.0, 5.0)]
    reports = [ev.summarize(lam, recs, 0.14) for lam in (1.0, 1e-2)]
    p = tmp_path / "r.csv"
    p.write_text(ev.report_csv(reports))
    rows = ev.read_report_csv(p)
    assert [r["lambda"] for r in rows] == [1.0, 1e-2] and rows[0]["success_rate"] == 1.0
    env = ASVEnv(seed=0, scenario=ev.builtin_scenarios()["B"], lam=1.0, record=True)
    env.reset()
    for _ in range(5):
        env.step([1000.0, 100.0])
    t = tmp_path / "t.csv"
    t.write_text(ev.trace_csv(env.trace))
    back = ev.read_trace_csv(t)
    assert back == [tuple(float(x) for x in row[:-1]) + (row[-1],) for row in env.trace]
    with pytest.raises(ValueError):
        ev.read_trace_csv(p)


def test_builtin_scenarios_geometry():
    sc = ev.builtin_scenarios()
    assert sorted(sc) == ["A", "B", "C", "D"]
    assert all(s.name.endswith("-v1") for s in sc.values())

    def clearance(s):
        pts = s.path.points(np.linspace(0, s.path.length, 2001))
        return min(np.hypot(*(pts - o.center).T).min() - o.radius for o in s.obstacles)

    assert clearance(sc["A"]) < 0          # obstacle sits on the path
    assert clearance(sc["B"]) > 20         # cluster is clear of the path
    assert clearance(sc["C"]) <= 0 and clearance(sc["D"]) < 0
    # the wall in C leaves a gap wider than the vessel
    ys = sorted(o.center[1] for o in sc["C"].obstacles)
    gaps = [b - a - 20.0 for a, b in zip(ys, ys[1:])]
    assert max(gaps) > 4.0


def test_scripted_rollouts_on_builtin_scenarios():
    sc = ev.builtin_scenarios()
    env = ASVEnv(seed=0, lam=1.0)
    reason, steps, cte, _ = ev.run_episode(LOSAgent(), env, sc["B"], 1.0)
    assert reason == "goal" and cte / steps < 1.0
    reason, *_ = ev.run_episode(LOSAgent(), env, sc["A"], 1.0)
    assert reason == "collision"


def test_run_eval_common_scenarios():
    cfg = EnvConfig(gen_params=scen.GenParams(N_o=0, L_p=100.0), max_steps=1500)
    a = ev.run_eval(LOSAgent(), 1.0, 3, seed=4, env_config=cfg)
    b = ev.run_eval(LOSAgent(), 1e-3, 3, seed=4, env_config=cfg)
    assert [r.scenario_seed for r in a.records] == [r.scenario_seed for r in b.records]
    assert a.episodes == 3 and 0.0 <= a.success_rate <= 1.0
    assert [r.reason for r in a.records] == [r.reason for r in b.records]


def test_emit_plots(tmp_path):
    fit = ev.lm_fit("loglinear-length", GRID, truth("loglinear-length", GRID))
    recs = [ev.EpisodeRecord(1, "goal", 10, 20.0, 5.0)]
    paths = ev.emit_plots(tmp_path, [ev.summarize(1.0, recs, 0.14)], fits=[fit],
                          scenarios={"A": ev.builtin_scenarios()["A"]})
    names = sorted(p.name for p in paths)
    assert names == ["fit_curve_loglinear-length.csv", "fits.csv", "scene_A.csv", "sweep.csv"]
    assert (tmp_path / "scene_A.csv").read_text().count("obstacle") == 1
