"""Small shared fixtures for the test-suite."""
import math

import numpy as np

from asvlab.env import StepResult
from asvlab.rl import PolicyValueNet, PPOConfig, log_prob, ppo_loss_and_grad


class Bandit:
    """One-step episodes; reward peaks when the normalized action equals ``target``."""

    obs_dim = 3
    action_low = np.array([-1.0])
    action_high = np.array([1.0])

    def __init__(self, seed, target=0.4, reward=None):
        self.target = target
        self.reward = reward

    def feature_scale(self):
        return np.ones(3)

    def reset(self):
        return np.array([1.0, 0.0, -1.0])

    def step(self, a):
        r = -(float(a[0]) - self.target) ** 2 * 10.0 if self.reward is None else self.reward
        return StepResult(self.reset(), r, True, "goal", {})


def random_minibatch(rng, m=32, obs_dim=32, act_dim=2):
    net = PolicyValueNet.initialized(rng, obs_dim=obs_dim, act_dim=act_dim, out_gain=0.5)
    net.p["log_std"][...] = rng.uniform(-1.0, 0.5, act_dim)
    obs = rng.standard_normal((m, obs_dim))
    mu, ls = net.policy_forward(obs)
    actions = mu + np.exp(ls) * rng.standard_normal(mu.shape)
    # old policy differs from the current one so some ratios fall outside the clip band;
    # ratios are kept 0.05 away from the band edges where the loss has kinks
    lp = log_prob(actions, mu, ls)
    old_lp = lp + rng.normal(0.0, 0.3, m)
    while True:
        ratio = np.exp(lp - old_lp)
        near = (np.abs(ratio - 0.8) < 0.05) | (np.abs(ratio - 1.2) < 0.05)
        if not near.any():
            break
        old_lp[near] = lp[near] + rng.normal(0.0, 0.3, near.sum())
    adv = rng.standard_normal(m)
    returns = 100.0 * rng.standard_normal(m)
    return net, obs, actions, old_lp, adv, returns


def finite_difference_grad(net, batch, cfg, eps=1e-3):
    """Fourth-order central differences, one parameter at a time.

    Plain two-point differences lose too many digits on parameters whose
    gradient is around 1e-8."""
    obs, actions, old_lp, adv, returns = batch
    p = net.params
    out = np.empty_like(p)

    def loss_at(i, value):
        p[i] = value
        return ppo_loss_and_grad(net, obs, actions, old_lp, adv, returns, cfg, need_grad=False)[0].loss

    for i in range(len(p)):
        keep = p[i]
        f = [loss_at(i, keep + k * eps) for k in (2, 1, -1, -2)]
        p[i] = keep
        out[i] = (-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * eps)
    return out


def max_relative_error(analytic, numeric, floor=1e-8):
    return float(np.max(np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), floor)))


def gae_double_sum(rewards, values, dones, gamma, lam, last_value):
    """Advantage as an explicit discounted sum of TD residuals."""
    n = len(rewards)
    nxt = list(values[1:]) + [last_value]
    delta = [rewards[k] + gamma * (0.0 if dones[k] else nxt[k]) - values[k] for k in range(n)]
    adv = np.zeros(n)
    for t in range(n):
        total = 0.0
        for k in range(t, n):
            total += (gamma * lam) ** (k - t) * delta[k]
            if dones[k]:
                break
        adv[t] = total
    return adv


__all__ = ["Bandit", "random_minibatch", "finite_difference_grad", "max_relative_error", "gae_double_sum",
           "PPOConfig", "math"]
