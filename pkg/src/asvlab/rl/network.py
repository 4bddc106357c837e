"""Actor and critic MLPs on a flat float64 parameter vector, with hand-written backprop."""
from __future__ import annotations

import math

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = math.log(2.0 * math.pi)


def layer_shapes(obs_dim=32, hidden=(64, 64), act_dim=2):
    """Parameter blocks in storage order: policy trunk, log-std, value trunk."""
    h1, h2 = hidden
    return [
        ("pi_w1", (obs_dim, h1)), ("pi_b1", (h1,)),
        ("pi_w2", (h1, h2)), ("pi_b2", (h2,)),
        ("pi_w3", (h2, act_dim)), ("pi_b3", (act_dim,)),
        ("log_std", (act_dim,)),
        ("vf_w1", (obs_dim, h1)), ("vf_b1", (h1,)),
        ("vf_w2", (h1, h2)), ("vf_b2", (h2,)),
        ("vf_w3", (h2, 1)), ("vf_b3", (1,)),
    ]


def _orthogonal(rng, shape, gain):
    a = rng.standard_normal(shape)
    flat = a if shape[0] >= shape[1] else a.T
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q


class PolicyValueNet:
    """Gaussian policy (state-independent log-std) and separate value network.

    ``params`` is a single contiguous array; ``self.p[name]`` are views into it,
    so in-place optimizer updates are seen by the forward pass.
    """

    def __init__(self, obs_dim=32, hidden=(64, 64), act_dim=2, params=None):
        self.obs_dim = obs_dim
        self.hidden = tuple(hidden)
        self.act_dim = act_dim
        self.shapes = layer_shapes(obs_dim, hidden, act_dim)
        self.size = sum(int(np.prod(s)) for _, s in self.shapes)
        self.params = np.zeros(self.size) if params is None else np.array(params, dtype=np.float64)
        if self.params.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {self.params.shape}")
        self.p = self._views(self.params)

    def _views(self, flat):
        out, k = {}, 0
        for name, shape in self.shapes:
            n = int(np.prod(shape))
            out[name] = flat[k:k + n].reshape(shape)
            k += n
        return out

    @classmethod
    def initialized(cls, rng, obs_dim=32, hidden=(64, 64), act_dim=2, gain=1.0, out_gain=0.01):
        net = cls(obs_dim, hidden, act_dim)
        for name, shape in net.shapes:
            if "_w" in name:
                g = out_gain if name.endswith("3") else gain
                net.p[name][...] = _orthogonal(rng, shape, g)
        return net

    def copy(self):
        return PolicyValueNet(self.obs_dim, self.hidden, self.act_dim, self.params.copy())

    def log_std(self):
        return np.clip(self.p["log_std"], LOG_STD_MIN, LOG_STD_MAX)

    def policy_forward(self, x, cache=False):
        p = self.p
        h1 = np.tanh(x @ p["pi_w1"] + p["pi_b1"])
        h2 = np.tanh(h1 @ p["pi_w2"] + p["pi_b2"])
        mu = h2 @ p["pi_w3"] + p["pi_b3"]
        if cache:
            return mu, self.log_std(), (x, h1, h2)
        return mu, self.log_std()

    def value_forward(self, x, cache=False):
        p = self.p
        g1 = np.tanh(x @ p["vf_w1"] + p["vf_b1"])
        g2 = np.tanh(g1 @ p["vf_w2"] + p["vf_b2"])
        v = (g2 @ p["vf_w3"] + p["vf_b3"])[..., 0]
        if cache:
            return v, (x, g1, g2)
        return v

    def backward(self, pol_cache, d_mu, d_log_std, val_cache, d_v):
        """Gradient of a scalar loss given its partials w.r.t. the network outputs."""
        grad = np.zeros(self.size)
        g = self._views(grad)
        p = self.p

        x, h1, h2 = pol_cache
        g["pi_w3"][...] = h2.T @ d_mu
        g["pi_b3"][...] = d_mu.sum(axis=0)
        dz2 = (d_mu @ p["pi_w3"].T) * (1.0 - h2 * h2)
        g["pi_w2"][...] = h1.T @ dz2
        g["pi_b2"][...] = dz2.sum(axis=0)
        dz1 = (dz2 @ p["pi_w2"].T) * (1.0 - h1 * h1)
        g["pi_w1"][...] = x.T @ dz1
        g["pi_b1"][...] = dz1.sum(axis=0)

        raw = p["log_std"]
        inside = (raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX)
        g["log_std"][...] = np.where(inside, d_log_std, 0.0)

        x, g1, g2 = val_cache
        dv = d_v[:, None]
        g["vf_w3"][...] = g2.T @ dv
        g["vf_b3"][...] = dv.sum(axis=0)
        dy2 = (dv @ p["vf_w3"].T) * (1.0 - g2 * g2)
        g["vf_w2"][...] = g1.T @ dy2
        g["vf_b2"][...] = dy2.sum(axis=0)
        dy1 = (dy2 @ p["vf_w2"].T) * (1.0 - g1 * g1)
        g["vf_w1"][...] = x.T @ dy1
        g["vf_b1"][...] = dy1.sum(axis=0)
        return grad


def log_prob(action, mu, log_std):
    z = (action - mu) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * mu.shape[-1] * LOG_2PI


def entropy(log_std):
    return float(np.sum(log_std) + 0.5 * len(log_std) * (1.0 + LOG_2PI))


def sample_action(mu, log_std, rng):
    """Draw from the diagonal Gaussian; the log-density is of the unclamped draw."""
    noise = rng.standard_normal(mu.shape)
    a = mu + np.exp(log_std) * noise
    return a, log_prob(a, mu, log_std)
