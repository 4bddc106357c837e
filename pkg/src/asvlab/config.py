"""Run configuration: one JSON tree, strictly validated, merged over defaults."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict

from . import dynamics
from .env import EnvConfig, RewardParams
from .rl.ppo import PPOConfig
from .scenario import GenParams
from .sensing import SensorConfig


class ConfigError(ValueError):
    pass


def defaults():
    gp = GenParams().to_dict()
    return {
        "vessel_params": None,  # path to a parameter JSON; null = shipped defaults
        "scenario": gp,
        "sensor": asdict(SensorConfig()),
        "reward": asdict(RewardParams()),
        "episode": {"h": dynamics.DEFAULT_STEP, "goal_radius": 5.0, "reward_floor": -5000.0,
                    "max_steps": 10_000, "lookahead": 100.0, "gamma_omega": 0.05,
                    "along_track_mode": "converge"},
        "ppo": PPOConfig().to_dict(),
        "seed": 0,
    }


def merge(base, override, where="config"):
    """Recursive merge; keys absent from ``base`` are rejected."""
    if not isinstance(override, dict):
        raise ConfigError(f"{where}: expected an object")
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if isinstance(base[key], dict):
            out[key] = merge(base[key], val, f"{where}.{key}")
        else:
            out[key] = val
    return out


def load_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return merge(defaults(), doc, str(path))


def validate(cfg):
    """Build every typed section once so bad values fail before any work starts."""
    try:
        build_env_config(cfg)
        ppo_config(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    return cfg


def ppo_config(cfg):
    return PPOConfig(**cfg["ppo"])


def build_env_config(cfg, vessel=None):
    """EnvConfig from a merged tree; ``vessel`` overrides the parameter-file lookup."""
    if vessel is None:
        vessel = dynamics.load_params(cfg["vessel_params"]) if cfg["vessel_params"] else dynamics.default_params()
    ep = cfg["episode"]
    return EnvConfig(
        gen_params=GenParams.from_dict(cfg["scenario"]),
        sensor=SensorConfig(**cfg["sensor"]),
        reward=RewardParams(**cfg["reward"]),
        vessel=vessel,
        h=float(ep["h"]),
        lookahead=float(ep["lookahead"]),
        gamma_omega=float(ep["gamma_omega"]),
        along_track_mode=str(ep["along_track_mode"]),
        goal_radius=float(ep["goal_radius"]),
        reward_floor=float(ep["reward_floor"]),
        max_steps=int(ep["max_steps"]),
    )


def dumps(cfg):
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"
