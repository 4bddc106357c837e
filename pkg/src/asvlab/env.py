"""Path-following / collision-avoidance MDP: observation, reward, episode protocol."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dynamics, geometry, scenario as scen
from .sampling import Sampler
from .sensing import SensorConfig, cast_rays, pool_all

OBS_DIM = 32
OBS_LAYOUT_VERSION = 1
OBS_NAMES = (
    "surge_velocity",
    "sway_velocity",
    "yaw_rate",
    "lookahead_course_error",
    "course_error",
    "cross_track_error",
    "log10_lambda",
) + tuple(f"closeness_sector_{k}" for k in range(25))


class EpisodeDoneError(RuntimeError):
    """step() called on a finished episode."""


@dataclass(frozen=True)
class RewardParams:
    lam: float = 1.0
    gamma_e: float = 0.05
    gamma_theta: float = 4.0
    gamma_x: float = 0.005
    epsilon_x: float = 1.0
    alpha_r: float = 0.1
    r_collision: float = -2000.0
    alpha_lambda: float = 1.0
    beta_lambda: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"trade-off parameter must lie in (0, 1], got {self.lam}")
        for name in ("gamma_e", "gamma_theta", "gamma_x", "epsilon_x", "alpha_r", "alpha_lambda", "beta_lambda"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.r_collision < 0:
            raise ValueError("collision reward must be negative")


def sample_lambda(rng, alpha=1.0, beta=2.0):
    """Trade-off parameter with -log10(lambda) ~ Gamma(shape=alpha, rate=beta)."""
    return 10.0 ** (-rng.gamma(alpha, beta))


def reward_pf(u, v, chi_err, e, params, U_max=2.0):
    speed = math.hypot(u, v)
    return -1.0 + (speed / U_max * math.cos(chi_err) + 1.0) * (math.exp(-params.gamma_e * abs(e)) + 1.0)


def reward_oa(distances, angles, params):
    weights = 1.0 / (1.0 + np.abs(params.gamma_theta * np.asarray(angles)))
    x = np.maximum(np.asarray(distances, dtype=float), params.epsilon_x)
    closeness = 1.0 / (params.gamma_x * x * x)
    return -float(weights @ closeness) / float(weights.sum())


def reward_exists(params):
    return -params.lam * (2.0 * params.alpha_r + 1.0)


def total_reward(r_pf, r_oa, collided, params):
    lam = params.lam
    if collided:
        return (1.0 - lam) * params.r_collision
    return lam * r_pf + (1.0 - lam) * r_oa + reward_exists(params)


def detect_collision(position, centers, radii, W):
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    if len(centers) == 0:
        return False
    dist = np.hypot(centers[:, 0] - position[0], centers[:, 1] - position[1])
    return bool(np.any(dist <= np.asarray(radii, dtype=float) + 0.5 * W))


@dataclass(frozen=True, eq=False)
class EnvConfig:
    gen_params: scen.GenParams = field(default_factory=scen.GenParams)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    reward: RewardParams = field(default_factory=RewardParams)
    vessel: dynamics.VesselParams = field(default_factory=dynamics.default_params)
    h: float = dynamics.DEFAULT_STEP
    lookahead: float = geometry.LOOKAHEAD_DISTANCE
    gamma_omega: float = geometry.ALONG_TRACK_GAIN
    along_track_mode: str = "converge"
    goal_radius: float = 5.0
    reward_floor: float = -5000.0
    max_steps: int = 10_000


@dataclass(eq=False)
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    termination_reason: str
    info: dict

    def __iter__(self):
        return iter((self.observation, self.reward, self.done, self.info))


def feature_scale(config):
    """Velocities by top speed, cross-track error by sensor range, others raw."""
    U, S_r = config.vessel.U_max, config.sensor.S_r
    head = [U, U, 1.0, 1.0, 1.0, S_r, 1.0]
    return np.array(head + [1.0] * (OBS_DIM - len(head)))


TRACE_COLUMNS = ("t", "x", "y", "psi", "u", "v", "r", "T_u", "T_r", "reward", "e", "s", "done_reason")


class ASVEnv:
    """Single-owner episode simulator.

    ``reset`` either draws a fresh scenario from the generator parameters or
    uses a fixed one; lambda is sampled per episode unless pinned.
    """

    def __init__(self, config=None, seed=0, scenario=None, lam=None, record=False):
        self.config = config or EnvConfig()
        if self.config.sensor.W != self.config.vessel.W:
            raise ValueError("sensor and vessel width disagree")
        self._rng = Sampler(seed)
        self.fixed_scenario = scenario
        self.fixed_lambda = lam
        self.record = record
        self.scenario = None
        self.done = True
        self.trace = []

    def seed(self, seed):
        self._rng = Sampler(seed)

    def reset(self, seed=None, scenario=None, lam=None):
        if seed is not None:
            self._rng = Sampler(seed)
        cfg = self.config
        sc = scenario or self.fixed_scenario
        if sc is None:
            sc = scen.generate(cfg.gen_params, int(self._rng.integers(0, 2**62)))
        if lam is None:
            lam = self.fixed_lambda
        if lam is None:
            lam = sample_lambda(self._rng, cfg.reward.alpha_lambda, cfg.reward.beta_lambda)
        self.scenario = sc
        self.rparams = replace(cfg.reward, lam=float(lam))
        self._centers, self._radii = sc.obstacle_arrays()
        psi0 = sc.path.tangent_angle(0.0)
        p0 = sc.path.point(0.0)
        self.state = np.array([p0[0], p0[1], dynamics.wrap_angle(psi0), 0.0, 0.0, 0.0])
        self.omega_bar = 0.0
        self.steps = 0
        self.cumulative_reward = 0.0
        self.done = False
        self.last_action = np.zeros(2)
        self._errors = self._tracking()
        self._sweep = cast_rays(self.state, self._centers, self._radii, cfg.sensor)
        self.trace = []
        if self.record:
            self._record(0.0, "none")
        return self._observation()

    @property
    def lam(self):
        return self.rparams.lam

    obs_dim = OBS_DIM

    @property
    def action_low(self):
        v = self.config.vessel
        return np.array([v.thrust_limits[0], v.rudder_limits[0]])

    @property
    def action_high(self):
        v = self.config.vessel
        return np.array([v.thrust_limits[1], v.rudder_limits[1]])

    def feature_scale(self):
        """Divisors applied to the observation before it enters a network."""
        return feature_scale(self.config)

    def _tracking(self):
        z = self.state
        course = geometry.course_angle(z[2], z[3], z[4])
        return geometry.tracking_errors(self.scenario.path, self.omega_bar, z[:2], course, self.config.lookahead)

    def _observation(self):
        z = self.state
        err = self._errors
        pooled = pool_all(self._sweep, "feasibility", self.config.sensor)
        closeness = 1.0 - pooled / self.config.sensor.S_r
        head = [z[3], z[4], z[5], err.lookahead_course_err, err.chi_err, err.e, math.log10(self.lam)]
        return np.concatenate([head, closeness])

    def _record(self, reward, reason):
        z = self.state
        self.trace.append((self.steps * self.config.h, z[0], z[1], z[2], z[3], z[4], z[5],
                           self.last_action[0], self.last_action[1], reward, self._errors.e,
                           self._errors.s, reason))

    def step(self, action):
        if self.done:
            raise EpisodeDoneError("episode finished; call reset()")
        cfg = self.config
        f = cfg.vessel.clamp(action)
        self.last_action = f
        self.state = dynamics.step_array(self.state, f, cfg.vessel, cfg.h)
        z = self.state

        err = self._tracking()
        pv = geometry.advance_path_variable(
            geometry.PathVariable(self.omega_bar, self.scenario.path.length),
            z[3], z[4], err.chi_err, err.s, cfg.h, cfg.gamma_omega, cfg.along_track_mode)
        self.omega_bar = pv.omega_bar
        self._errors = err = self._tracking()
        self._sweep = sweep = cast_rays(z, self._centers, self._radii, cfg.sensor)
        self.steps += 1

        collided = sweep.inside_obstacle or detect_collision(z[:2], self._centers, self._radii, cfg.vessel.W)
        r_pf = reward_pf(z[3], z[4], err.chi_err, err.e, self.rparams, cfg.vessel.U_max)
        r_oa = reward_oa(sweep.distances, sweep.angles, self.rparams)
        reward = total_reward(r_pf, r_oa, collided, self.rparams)
        self.cumulative_reward += reward

        reason = "none"
        if collided:
            reason = "collision"
        elif math.hypot(z[0] - self.scenario.p_end[0], z[1] - self.scenario.p_end[1]) <= cfg.goal_radius:
            reason = "goal"
        elif self.cumulative_reward <= cfg.reward_floor:
            reason = "reward_floor"
        elif self.steps >= cfg.max_steps:
            reason = "max_steps"
        self.done = reason != "none"
        if self.record:
            self._record(reward, reason)
        info = {
            "cross_track_error": err.e,
            "along_track_error": err.s,
            "position": z[:2].copy(),
            "sweep": sweep,
            "omega_bar": self.omega_bar,
            "steps": self.steps,
            "lambda": self.lam,
            "collided": collided,
        }
        return StepResult(self._observation(), reward, self.done, reason, info)
