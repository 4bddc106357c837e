import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asvlab import scenario as scen
from asvlab.sampling import Sampler


def test_same_seed_same_scenario():
    a, b = scen.generate(seed=11), scen.generate(seed=11)
    assert scen.dumps(a) == scen.dumps(b)
    assert scen.dumps(a) != scen.dumps(scen.generate(seed=12))


@pytest.mark.parametrize("seed", range(25))
def test_structure(seed):
    p = scen.GenParams()
    s = scen.generate(p, seed)
    assert len(s.obstacles) == p.N_o
    assert math.hypot(*s.p_start) == 0.5 * p.L_p
    assert np.array_equal(s.p_end, -s.p_start)
    wps = s.path.waypoints
    assert p.N_w_range[0] + 2 <= len(wps) <= p.N_w_range[1] + 2
    assert np.array_equal(wps[0], s.p_start) and np.array_equal(wps[-1], s.p_end)
    for o, (w, d) in zip(s.obstacles, s.placements):
        assert o.radius >= 1 and o.radius == int(o.radius)
        assert 0.1 * p.L_p <= w <= 0.9 * p.L_p
        # center sits |d| from the path point along the right-hand normal
        g = s.path.tangent_angle(w)
        normal = np.array([math.cos(g - math.pi / 2), math.sin(g - math.pi / 2)])
        assert np.allclose(np.array(o.center), s.path.point(w) + d * normal, atol=1e-9)
        for end in (s.p_start, s.p_end):
            assert np.hypot(*(np.array(o.center) - end)) > o.radius + p.endpoint_clearance


def test_point_on_circle_exact():
    rng = np.random.default_rng(1)
    for theta in rng.uniform(0, 2 * math.pi, 2000):
        q = scen.point_on_circle(theta, 200.0)
        assert math.hypot(*q) == 200.0
        assert abs(math.atan2(q[1], q[0]) - math.atan2(math.sin(theta), math.cos(theta))) < 1e-12


def test_desk_params_statistics():
    radii = [o.radius for k in range(400) for o in scen.generate(scen.DESK_PARAMS, k).obstacles]
    assert len(radii) == 2400
    assert abs(np.mean(radii) - 15.0) < 0.5


def test_gen_params_validation_and_dict():
    with pytest.raises(ValueError):
        scen.GenParams(N_o=-1)
    with pytest.raises(ValueError):
        scen.GenParams(N_w_range=(4, 2))
    with pytest.raises(ValueError):
        scen.GenParams(mu_r=0)
    p = scen.GenParams(N_o=3, N_w_range=[1, 2])
    assert scen.GenParams.from_dict(p.to_dict()) == p


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**40))
def test_round_trip(tmp_path_factory, seed):
    s = scen.generate(scen.DESK_PARAMS, seed)
    path = tmp_path_factory.mktemp("sc") / "s.json"
    scen.save(s, path)
    back = scen.load(path)
    assert back == s
    assert back.seed == seed and back.gen_params == scen.DESK_PARAMS
    assert np.array_equal(back.path.point(37.5), s.path.point(37.5))


def test_truncated_file_is_rejected(tmp_path):
    text = scen.dumps(scen.generate(seed=3))
    f = tmp_path / "t.json"
    f.write_text(text[: len(text) // 2])
    with pytest.raises(scen.ScenarioFileError, match="t.json"):
        scen.load(f)


def test_version_mismatch():
    doc = scen.generate(seed=3).to_dict()
    doc["version"] = 99
    with pytest.raises(scen.UnsupportedVersionError):
        scen.from_dict(doc)


@pytest.mark.parametrize("field,value", [
    ("format", "other"), ("p_start", [1.0]), ("obstacles", [[0, 0, -1]]), ("waypoints", [[0, 0]]), ("seed", "x"),
])
def test_bad_fields(field, value):
    doc = scen.generate(seed=3).to_dict()
    doc[field] = value
    with pytest.raises(scen.ScenarioFileError):
        scen.from_dict(doc)


def test_missing_field_named():
    doc = scen.generate(seed=3).to_dict()
    del doc["obstacles"]
    with pytest.raises(scen.ScenarioFileError, match="obstacles"):
        scen.loads(json.dumps(doc))


def test_save_leaves_no_temp_files(tmp_path):
    scen.save(scen.generate(seed=1), tmp_path / "a.json")
    assert [p.name for p in tmp_path.iterdir()] == ["a.json"]


def test_sampler_streams():
    a = Sampler(5, 1, 2).uniform(size=4)
    assert np.array_equal(a, Sampler(5, 1, 2).uniform(size=4))
    assert not np.array_equal(a, Sampler(5, 1, 3).uniform(size=4))
    assert np.array_equal(Sampler(5).spawn(1, 2).uniform(size=4), a)
    with pytest.raises(ValueError):
        Sampler(None)
    ints = Sampler(0).integers(2, 5, size=5000)
    assert ints.min() == 2 and ints.max() == 5


def test_sampler_moments():
    rng = Sampler(2024)
    assert abs(rng.uniform(0, 1, 10**6).mean() - 0.5) < 0.002
    assert abs(rng.gaussian(0, 150, 10**6).std() - 150) < 1
    assert abs(rng.poisson(30, 10**6).var() - 30) < 1
    # shape 1, rate 2 -> mean 0.5
    assert abs(rng.gamma(1.0, 2.0, 10**6).mean() - 0.5) < 0.005
