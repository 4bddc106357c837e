"""Versioned little-endian binary checkpoint.

Layout::

    magic      8 bytes  b"ASVPPO\\x00\\x01"
    version    u32
    obs_dim, hidden1, hidden2, act_dim   u32 x 4
    n_params, adam_t, iteration, steps   u64 x 4
    meta_len   u64, then meta_len bytes of UTF-8 JSON (run configuration)
    feature scale    f64 x obs_dim
    action low/high  f64 x act_dim each
    parameters       f64 x n_params   (block order of network.layer_shapes)
    adam m, adam v   f64 x n_params each
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..fileio import atomic_write_bytes
from .network import PolicyValueNet
from .ppo import Adam

MAGIC = b"ASVPPO\x00\x01"
VERSION = 1
_HEAD = struct.Struct("<8sI4I5Q")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    net: PolicyValueNet
    adam: Adam
    feature_scale: np.ndarray
    action_low: np.ndarray
    action_high: np.ndarray
    iteration: int = 0
    steps: int = 0
    meta: dict = field(default_factory=dict)


def to_bytes(ck):
    net = ck.net
    meta = json.dumps(ck.meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    head = _HEAD.pack(MAGIC, VERSION, net.obs_dim, net.hidden[0], net.hidden[1], net.act_dim,
                      net.size, ck.adam.t, ck.iteration, ck.steps, len(meta))
    f64 = np.dtype("<f8")
    body = [np.asarray(a, dtype=f64).tobytes() for a in
            (ck.feature_scale, ck.action_low, ck.action_high, net.params, ck.adam.m, ck.adam.v)]
    return head + meta + b"".join(body)


def from_bytes(data):
    if len(data) < _HEAD.size:
        raise CheckpointError("file too short for a checkpoint header")
    magic, version, obs_dim, h1, h2, act_dim, n, t, it, steps, meta_len = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = _HEAD.size
    meta = json.loads(data[pos:pos + meta_len].decode("utf-8"))
    pos += meta_len
    sizes = (obs_dim, act_dim, act_dim, n, n, n)
    if len(data) != pos + 8 * sum(sizes):
        raise CheckpointError("checkpoint length does not match its header")
    arrays = []
    for k in sizes:
        arrays.append(np.frombuffer(data, dtype="<f8", count=k, offset=pos).astype(np.float64))
        pos += 8 * k
    scale, low, high, params, m, v = arrays
    net = PolicyValueNet(obs_dim, (h1, h2), act_dim, params)
    adam = Adam(n)
    adam.m, adam.v, adam.t = m, v, t
    return Checkpoint(net, adam, scale, low, high, it, steps, meta)


def save(ck, path):
    atomic_write_bytes(path, to_bytes(ck))


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
