"""Seedable samplers on a counter-based bit generator (Philox 4x64).

Independent reproducible streams come from ``(seed, *stream_ids)``; parallel
workers use distinct stream ids instead of sharing state.
"""
from __future__ import annotations

import numpy as np


class Sampler:
    def __init__(self, seed, *stream):
        if seed is None:
            raise ValueError("an explicit integer seed is required")
        ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=tuple(int(s) for s in stream))
        self.seed = int(seed)
        self.stream = tuple(stream)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def spawn(self, *stream):
        return Sampler(self.seed, *(self.stream + stream))

    @property
    def generator(self):
        return self._gen

    def uniform(self, a=0.0, b=1.0, size=None):
        return self._gen.uniform(a, b, size)

    def gaussian(self, mu=0.0, sigma=1.0, size=None):
        return self._gen.normal(mu, sigma, size)

    def poisson(self, mu, size=None):
        return self._gen.poisson(mu, size)

    def gamma(self, shape, rate, size=None):
        """Gamma with shape/rate parameterization (mean shape/rate)."""
        return self._gen.gamma(shape, 1.0 / rate, size)

    def integers(self, lo, hi, size=None):
        """Uniform integers in the closed range [lo, hi]."""
        return self._gen.integers(lo, hi, size, endpoint=True)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def permutation(self, n):
        return self._gen.permutation(n)


def uniform(rng, a, b, size=None):
    return rng.uniform(a, b, size)


def gaussian(rng, mu, sigma, size=None):
    return rng.gaussian(mu, sigma, size)


def poisson(rng, mu, size=None):
    return rng.poisson(mu, size)
