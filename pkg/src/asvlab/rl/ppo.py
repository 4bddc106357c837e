"""GAE, clipped-surrogate loss with analytic gradient, and Adam."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .network import log_prob


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = 0.999
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    c1: float = 0.5
    c2: float = 0.01
    learning_rate: float = 2e-4
    T: int = 1024
    N_A: int = 8
    N_MB: int = 32  # minibatch size
    N_E: int = 10
    total_steps: int = 1_000_000
    normalize_advantages: bool = True
    value_scale: float = 100.0  # the value head predicts return / value_scale
    init_log_std: float = -0.5
    checkpoint_every: int = 10  # iterations

    def __post_init__(self):
        if not (0 < self.gamma <= 1 and 0 < self.gae_lambda <= 1):
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must lie in (0, 1)")
        if self.learning_rate < 0 or self.c1 < 0 or self.c2 < 0:
            raise ValueError("learning rate and loss coefficients must be non-negative")
        for name in ("T", "N_A", "N_MB", "N_E", "checkpoint_every"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not self.value_scale > 0:
            raise ValueError("value_scale must be positive")
        if self.total_steps < 0:
            raise ValueError("total_steps must be non-negative")

    def to_dict(self):
        return asdict(self)


def compute_gae(rewards, values, dones, gamma, gae_lambda, last_value=0.0):
    """Advantages and returns for one trajectory segment.

    ``dones[t]`` marks that the episode ended after step t, so no value is
    bootstrapped across it; ``last_value`` is V(s_T) for an unfinished segment.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    next_value = float(last_value)
    for t in range(n - 1, -1, -1):
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * gae_lambda * live * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


@dataclass
class LossInfo:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float


def ppo_loss_and_grad(net, obs, actions, old_log_probs, advantages, returns, cfg, need_grad=True):
    """Composite PPO loss on one minibatch and its gradient w.r.t. ``net.params``."""
    m = len(obs)
    adv = np.asarray(advantages, dtype=float)
    if cfg.normalize_advantages and m > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    mu, log_std, pcache = net.policy_forward(obs, cache=True)
    v, vcache = net.value_forward(obs, cache=True)
    lp = log_prob(actions, mu, log_std)
    ratio = np.exp(lp - old_log_probs)
    lo, hi = 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps
    unclipped = ratio * adv
    clipped = np.clip(ratio, lo, hi) * adv
    surr = np.minimum(unclipped, clipped)
    policy_loss = -surr.mean()
    value_err = v - np.asarray(returns) / cfg.value_scale
    value_loss = float(np.mean(value_err ** 2))
    ent = float(np.sum(log_std) + 0.5 * len(log_std) * (1.0 + np.log(2.0 * np.pi)))
    loss = policy_loss + cfg.c1 * value_loss - cfg.c2 * ent
    info = LossInfo(float(loss), float(policy_loss), value_loss, ent,
                    float(np.mean(np.abs(ratio - 1.0) > cfg.clip_eps)))
    if not need_grad:
        return info, None

    # d surr / d ratio is adv where the unclipped branch is active
    active = (unclipped <= clipped) | ((ratio > lo) & (ratio < hi))
    d_lp = -(adv * ratio * active) / m
    inv_std = np.exp(-log_std)
    z = (actions - mu) * inv_std
    d_mu = d_lp[:, None] * z * inv_std
    d_log_std = (d_lp[:, None] * (z * z - 1.0)).sum(axis=0) - cfg.c2
    d_v = 2.0 * cfg.c1 * value_err / m
    return info, net.backward(pcache, d_mu, d_log_std, vcache, d_v)


class Adam:
    def __init__(self, size, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params, grad, lr):
        """In-place update of ``params``."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * grad
        self.v *= b2
        self.v += (1.0 - b2) * grad * grad
        m_hat = self.m / (1.0 - b1 ** self.t)
        v_hat = self.v / (1.0 - b2 ** self.t)
        params -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


def adam_step(params, grads, state, eta):
    """Functional form: returns updated copy of ``params``; ``state`` is an Adam."""
    out = np.array(params, dtype=float)
    state.step(out, np.asarray(grads, dtype=float), eta)
    return out
