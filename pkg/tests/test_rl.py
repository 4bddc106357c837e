import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from asvlab.rl import (Adam, PolicyValueNet, PPOConfig, TrainingError, adam_step, compute_gae, entropy,
                       log_prob, ppo_loss_and_grad, sample_action, train)
from asvlab.rl import checkpoint as ckpt
from asvlab.rl.train import Agent, read_metrics
from helpers import Bandit, finite_difference_grad, gae_double_sum, max_relative_error, random_minibatch


def test_parameter_layout():
    net = PolicyValueNet()
    assert net.size == (32 * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2) + 2 + (32 * 64 + 64 + 64 * 64 + 64 + 64 + 1)
    net.params[:] = np.arange(net.size)
    assert net.p["pi_w1"][0, 1] == 1.0
    net.p["log_std"][...] = -7.0
    assert np.count_nonzero(net.params == -7.0) == 2
    with pytest.raises(ValueError):
        PolicyValueNet(params=np.zeros(3))


def test_orthogonal_init():
    net = PolicyValueNet.initialized(np.random.default_rng(0))
    w = net.p["pi_w2"]
    assert np.allclose(w.T @ w, np.eye(64), atol=1e-10)
    w1 = net.p["vf_w1"]
    assert np.allclose(w1.T @ w1, np.eye(64), atol=1e-10) or np.allclose(w1 @ w1.T, np.eye(32), atol=1e-10)
    assert np.all(net.p["pi_b1"] == 0)
    assert np.abs(net.p["pi_w3"]).max() <= 0.01 + 1e-12


def test_log_prob_and_entropy_against_scipy():
    rng = np.random.default_rng(1)
    mu = rng.standard_normal((5, 2))
    ls = np.array([-0.3, 0.4])
    a = rng.standard_normal((5, 2))
    ref = stats.norm.logpdf(a, mu, np.exp(ls)).sum(axis=1)
    assert np.allclose(log_prob(a, mu, ls), ref, atol=1e-12)
    assert entropy(ls) == pytest.approx(stats.norm(0, np.exp(ls)).entropy().sum(), abs=1e-12)


def test_sample_action_statistics():
    rng = np.random.default_rng(2)
    mu = np.tile([0.5, -1.0], (200000, 1))
    a, lp = sample_action(mu, np.array([-1.0, 0.0]), rng)
    assert np.allclose(a.mean(axis=0), [0.5, -1.0], atol=0.01)
    assert np.allclose(a.std(axis=0), [math.exp(-1.0), 1.0], atol=0.01)
    assert np.allclose(lp, log_prob(a, mu, np.array([-1.0, 0.0])))


@pytest.mark.parametrize("seed", range(3))
def test_loss_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net, obs, actions, old_lp, adv, returns = random_minibatch(rng, m=16)
    cfg = PPOConfig()
    _, grad = ppo_loss_and_grad(net, obs, actions, old_lp, adv, returns, cfg)
    fd = finite_difference_grad(net, (obs, actions, old_lp, adv, returns), cfg)
    assert max_relative_error(grad, fd) < 1e-4


def test_ratio_one_gives_mean_advantage():
    rng = np.random.default_rng(4)
    net, obs, actions, _, adv, returns = random_minibatch(rng)
    mu, ls = net.policy_forward(obs)
    lp = log_prob(actions, mu, ls)
    raw = PPOConfig(normalize_advantages=False, c1=0.0, c2=0.0)
    info, _ = ppo_loss_and_grad(net, obs, actions, lp, adv, returns, raw)
    assert info.policy_loss == pytest.approx(-adv.mean(), abs=1e-12)
    info, _ = ppo_loss_and_grad(net, obs, actions, lp, adv, returns, PPOConfig())
    assert abs(info.policy_loss) < 1e-12 and info.clip_fraction == 0.0


def test_clipped_samples_carry_no_policy_gradient():
    rng = np.random.default_rng(5)
    net, obs, actions, _, _, returns = random_minibatch(rng, m=4)
    mu, ls = net.policy_forward(obs)
    lp = log_prob(actions, mu, ls)
    # ratio 1.5 with positive advantage and ratio 0.5 with negative advantage are both clipped
    old = lp - np.log([1.5, 1.5, 0.5, 0.5])
    adv = np.array([1.0, 1.0, -1.0, -1.0])
    cfg = PPOConfig(normalize_advantages=False, c1=0.0, c2=0.0)
    info, grad = ppo_loss_and_grad(net, obs, actions, old, adv, returns, cfg)
    assert np.all(grad == 0.0)
    assert info.clip_fraction == 1.0
    # the same ratios with opposite advantages are not clipped
    info, grad = ppo_loss_and_grad(net, obs, actions, old, -adv, returns, cfg)
    assert np.any(grad != 0.0)


def test_value_loss_uses_scaled_returns():
    rng = np.random.default_rng(6)
    net, obs, actions, old_lp, adv, _ = random_minibatch(rng)
    v = net.value_forward(obs)
    cfg = PPOConfig()
    info, _ = ppo_loss_and_grad(net, obs, actions, old_lp, adv, cfg.value_scale * v, cfg)
    assert info.value_loss == pytest.approx(0.0, abs=1e-20)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 100), st.integers(0, 2**32 - 1), st.floats(0.5, 1.0), st.floats(0.0, 1.0))
def test_gae_matches_double_sum(n, seed, gamma, lam):
    rng = np.random.default_rng(seed)
    r, v = rng.standard_normal(n), rng.standard_normal(n)
    d = rng.random(n) < 0.1
    last = rng.standard_normal()
    adv, ret = compute_gae(r, v, d, gamma, lam, last)
    ref = gae_double_sum(r, v, d, gamma, lam, last)
    assert np.max(np.abs(adv - ref)) < 1e-10
    assert np.allclose(ret, adv + v)


def test_gae_single_step_and_monte_carlo_limit():
    adv, _ = compute_gae([1.0], [0.5], [True], 0.99, 0.95)
    assert adv[0] == pytest.approx(0.5)
    r = np.ones(5)
    adv, ret = compute_gae(r, np.zeros(5), [0, 0, 0, 0, 1], 0.9, 1.0)
    assert ret[0] == pytest.approx(sum(0.9 ** k for k in range(5)))


def test_adam_matches_reference_formula():
    rng = np.random.default_rng(7)
    p = rng.standard_normal(5)
    opt = Adam(5)
    ref_p, m, v = p.copy(), np.zeros(5), np.zeros(5)
    for t in range(1, 6):
        g = rng.standard_normal(5)
        new = adam_step(p, g, opt, 0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref_p = ref_p - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        assert np.allclose(new, ref_p, atol=1e-14)
        assert not np.shares_memory(new, p)
        p = new


def test_first_adam_step_has_size_lr():
    p = np.zeros(3)
    Adam(3).step(p, np.array([5.0, -0.001, 0.0]), 0.1)
    assert np.allclose(p, [-0.1, 0.1, 0.0], atol=1e-6)


def test_config_validation():
    for bad in ({"gamma": 0.0}, {"clip_eps": 1.5}, {"N_MB": 0}, {"learning_rate": -1.0}, {"value_scale": 0}):
        with pytest.raises(ValueError):
            PPOConfig(**bad)


SMALL = dict(T=16, N_A=2, N_MB=8, N_E=2, checkpoint_every=1)


def test_bandit_converges():
    cfg = PPOConfig(total_steps=20000, T=64, N_A=4, N_MB=64, N_E=4, learning_rate=1e-3, gamma=0.9,
                    init_log_std=-0.5)
    ck, rows = train(Bandit, cfg, seed=0)
    mean = Agent.from_checkpoint(ck).net.policy_forward(Bandit(0).reset()[None])[0][0, 0]
    assert abs(mean - 0.4) < 0.05
    assert rows[-1][2] > rows[0][2]


def test_zero_learning_rate_keeps_parameters():
    cfg = PPOConfig(total_steps=64, learning_rate=0.0, **SMALL)
    ck0, _ = train(Bandit, PPOConfig(total_steps=0, **SMALL), seed=3)
    ck1, _ = train(Bandit, cfg, seed=3)
    assert np.array_equal(ck0.net.params, ck1.net.params)
    assert ck1.steps == 64 and ck1.iteration == 2


def test_exact_step_budget():
    ck, rows = train(Bandit, PPOConfig(total_steps=50, **SMALL), seed=1)
    assert ck.steps == 50 and rows[-1][1] == 50


def test_training_is_deterministic(tmp_path):
    cfg = PPOConfig(total_steps=96, **SMALL)
    train(Bandit, cfg, seed=5, out_dir=tmp_path / "a")
    train(Bandit, cfg, seed=5, out_dir=tmp_path / "b")
    for name in ("checkpoint.bin", "metrics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    train(Bandit, cfg, seed=6, out_dir=tmp_path / "c")
    assert (tmp_path / "c" / "checkpoint.bin").read_bytes() != (tmp_path / "a" / "checkpoint.bin").read_bytes()


def test_resume_continues_counters(tmp_path):
    train(Bandit, PPOConfig(total_steps=64, **SMALL), seed=2, out_dir=tmp_path)
    ck = ckpt.load(tmp_path / "checkpoint.bin")
    assert ck.iteration == 2
    ck2, rows = train(Bandit, PPOConfig(total_steps=128, **SMALL), seed=2, out_dir=tmp_path, resume=ck)
    assert ck2.iteration == 4 and ck2.steps == 128
    assert [r[0] for r in read_metrics(tmp_path / "metrics.csv")] == [0, 1, 2, 3]
    assert ck2.adam.t == 4 * 2 * 4


def test_non_finite_loss_raises_and_dumps(tmp_path):
    def factory(seed):
        return Bandit(seed, reward=float("nan"))
    with pytest.raises(TrainingError, match="iteration 0"):
        train(factory, PPOConfig(total_steps=32, **SMALL), seed=0, out_dir=tmp_path)
    assert list(tmp_path.glob("nonfinite_minibatch_iter0.npz"))


def test_checkpoint_round_trip_and_errors(tmp_path):
    ck, _ = train(Bandit, PPOConfig(total_steps=32, **SMALL), seed=0, meta={"note": "x"})
    data = ckpt.to_bytes(ck)
    back = ckpt.from_bytes(data)
    assert ckpt.to_bytes(back) == data
    assert back.meta == {"note": "x"} and back.steps == 32
    assert np.array_equal(back.adam.m, ck.adam.m)
    with pytest.raises(ckpt.CheckpointError):
        ckpt.from_bytes(b"nope" + data[4:])
    with pytest.raises(ckpt.CheckpointError):
        ckpt.from_bytes(data[:-8])
    with pytest.raises(ckpt.CheckpointError):
        ckpt.from_bytes(data[:20])
    bumped = bytearray(data)
    bumped[8] = 9
    with pytest.raises(ckpt.CheckpointError, match="version"):
        ckpt.from_bytes(bytes(bumped))


def test_agent_actions_within_limits():
    net = PolicyValueNet.initialized(np.random.default_rng(0), out_gain=50.0)
    agent = Agent(net, np.ones(32), [0.0, -2700.0], [1400.0, 2700.0])
    a = agent.mean_action(np.random.default_rng(1).standard_normal(32) * 10)
    assert 0.0 <= a[0] <= 1400.0 and -2700.0 <= a[1] <= 2700.0
    assert np.allclose(agent.to_physical(np.zeros(2)), [700.0, 0.0])
