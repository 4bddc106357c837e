"""Rollout collection and the PPO optimization loop."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..fileio import atomic_write_text
from ..sampling import Sampler
from . import checkpoint as ckpt
from .network import LOG_STD_MAX, LOG_STD_MIN, PolicyValueNet, log_prob, sample_action
from .ppo import Adam, PPOConfig, compute_gae, ppo_loss_and_grad

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("iteration", "steps", "mean_reward", "success_rate", "policy_loss",
                  "value_loss", "entropy", "kl_estimate")
CHECKPOINT_NAME = "checkpoint.bin"
METRICS_NAME = "metrics.csv"


class TrainingError(RuntimeError):
    pass


class ActionMap:
    """Affine map from the policy's [-1, 1] box onto actuator limits."""

    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)

    def __call__(self, a):
        a = np.clip(a, -1.0, 1.0)
        return self.low + 0.5 * (a + 1.0) * (self.high - self.low)


class Agent:
    """Policy network plus the input scaling and action map it was trained with."""

    def __init__(self, net, feature_scale, action_low, action_high):
        self.net = net
        self.feature_scale = np.asarray(feature_scale, dtype=float)
        self.to_physical = ActionMap(action_low, action_high)

    @classmethod
    def from_checkpoint(cls, ck):
        return cls(ck.net, ck.feature_scale, ck.action_low, ck.action_high)

    def mean_action(self, obs):
        mu, _ = self.net.policy_forward(np.asarray(obs, dtype=float) / self.feature_scale)
        return self.to_physical(mu)


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def _worker_seed(seed, worker, iteration):
    return int(Sampler(seed, 1, worker, iteration).integers(0, 2**62))


def new_checkpoint(env, seed, meta=None, init_log_std=0.0):
    net = PolicyValueNet.initialized(Sampler(seed, 0).generator, obs_dim=env.obs_dim,
                                     act_dim=len(env.action_low))
    net.p["log_std"][...] = init_log_std
    return ckpt.Checkpoint(net, Adam(net.size), env.feature_scale(), env.action_low,
                           env.action_high, meta=dict(meta or {}))


def _collect(envs, obs, agent, T, rng, stats, value_scale):
    n_a = len(envs)
    net = agent.net
    od = net.obs_dim
    O = np.empty((n_a, T, od))
    A = np.empty((n_a, T, net.act_dim))
    LP = np.empty((n_a, T))
    R = np.empty((n_a, T))
    V = np.empty((n_a, T))
    D = np.zeros((n_a, T), dtype=bool)
    for t in range(T):
        X = np.stack(obs) / agent.feature_scale
        mu, ls = net.policy_forward(X)
        a, lp = sample_action(mu, ls, rng)
        O[:, t], A[:, t], LP[:, t] = X, a, lp
        V[:, t] = value_scale * net.value_forward(X)
        for w, env in enumerate(envs):
            res = env.step(agent.to_physical(a[w]))
            R[w, t] = res.reward
            stats["ep_return"][w] += res.reward
            if res.done:
                D[w, t] = True
                stats["returns"].append(stats["ep_return"][w])
                stats["reasons"].append(res.termination_reason)
                stats["ep_return"][w] = 0.0
                obs[w] = env.reset()
            else:
                obs[w] = res.observation
    last_v = value_scale * net.value_forward(np.stack(obs) / agent.feature_scale)
    return O, A, LP, R, V, D, last_v


def _dump_minibatch(out_dir, it, mb):
    if out_dir is None:
        return None
    path = Path(out_dir) / f"nonfinite_minibatch_iter{it}.npz"
    np.savez(path, **mb)
    return path


def metrics_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for row in rows:
        w.writerow([row[0], row[1]] + [repr(float(x)) for x in row[2:]])
    return buf.getvalue()


def read_metrics(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != METRIC_COLUMNS:
        raise ValueError(f"{path}: not a metrics file")
    return [[int(r[0]), int(r[1])] + [float(x) for x in r[2:]] for r in rows[1:]]


def train(env_factory, cfg=None, seed=0, out_dir=None, resume=None, meta=None, progress=None):
    """Run PPO until ``cfg.total_steps`` aggregate environment steps.

    ``env_factory(seed)`` builds one worker environment.  With ``out_dir`` a
    checkpoint and the metrics CSV are written every ``cfg.checkpoint_every``
    iterations and at the end.  ``resume`` continues from a Checkpoint whose
    metrics rows are taken from ``out_dir``.
    Returns ``(checkpoint, metrics_rows)``.
    """
    cfg = cfg or PPOConfig()
    rows = []
    if resume is not None:
        ck = resume
        if out_dir is not None and (Path(out_dir) / METRICS_NAME).exists():
            rows = [r for r in read_metrics(Path(out_dir) / METRICS_NAME) if r[0] < ck.iteration]
    else:
        ck = None
    start_iter = ck.iteration if ck else 0
    envs = [env_factory(_worker_seed(seed, w, start_iter)) for w in range(cfg.N_A)]
    if ck is None:
        ck = new_checkpoint(envs[0], seed, meta, cfg.init_log_std)
    agent = Agent.from_checkpoint(ck)
    net, adam = ck.net, ck.adam

    def write():
        if out_dir is not None:
            ckpt.save(ck, Path(out_dir) / CHECKPOINT_NAME)
            atomic_write_text(Path(out_dir) / METRICS_NAME, metrics_csv(rows))

    if ck.steps >= cfg.total_steps:
        write()
        return ck, rows

    obs = [env.reset() for env in envs]
    stats = {"ep_return": np.zeros(cfg.N_A), "returns": [], "reasons": []}
    while ck.steps < cfg.total_steps:
        it = ck.iteration
        T = min(cfg.T, math.ceil((cfg.total_steps - ck.steps) / cfg.N_A))
        stats["returns"], stats["reasons"] = [], []
        O, A, LP, R, V, D, last_v = _collect(envs, obs, agent, T, Sampler(seed, 2, it), stats, cfg.value_scale)
        adv, ret = np.empty_like(R), np.empty_like(R)
        for w in range(cfg.N_A):
            adv[w], ret[w] = compute_gae(R[w], V[w], D[w], cfg.gamma, cfg.gae_lambda, last_v[w])
        n = cfg.N_A * T
        batch = Batch(O.reshape(n, -1), A.reshape(n, -1), LP.reshape(n), adv.reshape(n), ret.reshape(n))

        shuffle = Sampler(seed, 3, it)
        sums = np.zeros(3)
        count = 0
        for _ in range(cfg.N_E):
            perm = shuffle.permutation(n)
            for k in range(0, n, cfg.N_MB):
                idx = perm[k:k + cfg.N_MB]
                info, grad = ppo_loss_and_grad(net, batch.obs[idx], batch.actions[idx], batch.log_probs[idx],
                                               batch.advantages[idx], batch.returns[idx], cfg)
                if not (math.isfinite(info.loss) and np.all(np.isfinite(grad))):
                    mb = {f: getattr(batch, f)[idx] for f in ("obs", "actions", "log_probs", "advantages", "returns")}
                    dump = _dump_minibatch(out_dir, it, mb)
                    raise TrainingError(f"non-finite loss at iteration {it}; minibatch dumped to {dump}")
                adam.step(net.params, grad, cfg.learning_rate)
                np.clip(net.p["log_std"], LOG_STD_MIN, LOG_STD_MAX, out=net.p["log_std"])
                sums += (info.policy_loss, info.value_loss, info.entropy)
                count += 1

        mu, ls = net.policy_forward(batch.obs)
        kl = float(np.mean(batch.log_probs - log_prob(batch.actions, mu, ls)))
        ck.steps += n
        ck.iteration += 1
        done_n = len(stats["returns"])
        mean_reward = float(np.mean(stats["returns"])) if done_n else math.nan
        success = stats["reasons"].count("goal") / done_n if done_n else math.nan
        pl, vl, ent = sums / max(count, 1)
        rows.append([it, ck.steps, mean_reward, success, pl, vl, ent, kl])
        log.debug("iter %d steps %d episodes %d reward %.2f success %.2f", it, ck.steps, done_n, mean_reward, success)
        if progress is not None:
            progress(rows[-1])
        if ck.iteration % cfg.checkpoint_every == 0 or ck.steps >= cfg.total_steps:
            write()
    return ck, rows
