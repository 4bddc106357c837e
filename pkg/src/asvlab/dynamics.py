"""3-DOF (surge, sway, yaw) surface vessel model and a fixed-step RKF45 integrator.

State is ``eta = [x, y, psi]`` in the north-east frame and ``nu = [u, v, r]``
in the body frame::

    eta_dot = R(psi) nu
    M nu_dot + C(nu) nu + D(nu) nu = B f,     f = [T_u, T_r]

C(nu) is built from M so that it is skew-symmetric for every nu; the damping
force is ``D_lin nu + diag(D_quad) (|nu| * nu)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

PARAM_FORMAT = "asvlab-vessel-params"
PARAM_VERSION = 1
DEFAULT_STEP = 0.14


class IntegrationError(ArithmeticError):
    """Raised when an RKF45 stage produces a non-finite state."""

    def __init__(self, stage, state):
        super().__init__(f"non-finite state at RKF45 stage {stage}: {state!r}")
        self.stage = stage
        self.state = state


class ParameterFileError(ValueError):
    pass


def wrap_angle(a):
    """Wrap an angle to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass(frozen=True)
class VesselState:
    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    u: float = 0.0
    v: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        vals = (self.x, self.y, self.psi, self.u, self.v, self.r)
        if not all(math.isfinite(c) for c in vals):
            raise ValueError(f"non-finite vessel state {vals}")
        object.__setattr__(self, "psi", wrap_angle(float(self.psi)))

    @classmethod
    def from_array(cls, a):
        return cls(*(float(c) for c in a))

    def as_array(self):
        return np.array([self.x, self.y, self.psi, self.u, self.v, self.r])

    @property
    def position(self):
        return np.array([self.x, self.y])

    @property
    def nu(self):
        return np.array([self.u, self.v, self.r])

    @property
    def speed(self):
        return math.hypot(self.u, self.v)


@dataclass(frozen=True)
class ControlInput:
    T_u: float = 0.0
    T_r: float = 0.0

    def as_array(self):
        return np.array([self.T_u, self.T_r])


@dataclass(frozen=True, eq=False)
class VesselParams:
    M: np.ndarray
    D_lin: np.ndarray
    D_quad: np.ndarray
    B: np.ndarray
    thrust_limits: tuple
    rudder_limits: tuple
    W: float = 4.0
    U_max: float = 2.0

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        D_lin = np.asarray(self.D_lin, dtype=float)
        D_quad = np.asarray(self.D_quad, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if M.shape != (3, 3) or D_lin.shape != (3, 3) or D_quad.shape != (3,) or B.shape != (3, 2):
            raise ParameterFileError("matrix shapes must be M 3x3, D_lin 3x3, D_quad 3, B 3x2")
        if not np.allclose(M, M.T, rtol=0, atol=1e-12):
            raise ParameterFileError("mass matrix must be symmetric")
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise ParameterFileError("mass matrix must be positive definite") from None
        if np.any(np.linalg.eigvalsh(0.5 * (D_lin + D_lin.T)) < 0) or np.any(D_quad < 0):
            raise ParameterFileError("damping must be dissipative")
        lo, hi = self.thrust_limits
        rlo, rhi = self.rudder_limits
        if not (lo <= hi and rlo <= rhi):
            raise ParameterFileError("actuator limits must be ordered [min, max]")
        for name, val in (("M", M), ("D_lin", D_lin), ("D_quad", D_quad), ("B", B)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "thrust_limits", (float(lo), float(hi)))
        object.__setattr__(self, "rudder_limits", (float(rlo), float(rhi)))
        M_inv = np.linalg.inv(M)
        M_inv.setflags(write=False)
        object.__setattr__(self, "M_inv", M_inv)

    def coriolis(self, nu):
        """C(nu), skew-symmetric by construction."""
        a1 = self.M[0] @ nu
        a2 = self.M[1] @ nu
        return np.array([[0.0, 0.0, -a2], [0.0, 0.0, a1], [a2, -a1, 0.0]])

    def damping_force(self, nu):
        nu = np.asarray(nu, dtype=float)
        return self.D_lin @ nu + self.D_quad * np.abs(nu) * nu

    def clamp(self, f):
        """Saturate [T_u, T_r] to the actuator limits."""
        t_u = min(max(float(f[0]), self.thrust_limits[0]), self.thrust_limits[1])
        t_r = min(max(float(f[1]), self.rudder_limits[0]), self.rudder_limits[1])
        return np.array([t_u, t_r])

    def kinetic_energy(self, nu):
        nu = np.asarray(nu, dtype=float)
        return 0.5 * nu @ self.M @ nu

    def to_dict(self):
        return {
            "format": PARAM_FORMAT,
            "version": PARAM_VERSION,
            "mass_matrix_kg": self.M.tolist(),
            "linear_damping_kg_per_s": self.D_lin.tolist(),
            "quadratic_damping_kg_per_m": self.D_quad.tolist(),
            "actuator_matrix": self.B.tolist(),
            "thrust_limits_N": list(self.thrust_limits),
            "yaw_moment_limits_N_m": list(self.rudder_limits),
            "width_m": self.W,
            "max_speed_m_per_s": self.U_max,
        }


_REQUIRED_KEYS = (
    "mass_matrix_kg",
    "linear_damping_kg_per_s",
    "quadratic_damping_kg_per_m",
    "actuator_matrix",
    "thrust_limits_N",
    "yaw_moment_limits_N_m",
    "width_m",
    "max_speed_m_per_s",
)


def params_from_dict(doc):
    if doc.get("format") != PARAM_FORMAT:
        raise ParameterFileError(f"not a vessel parameter document (format={doc.get('format')!r})")
    if doc.get("version") != PARAM_VERSION:
        raise ParameterFileError(f"unsupported parameter file version {doc.get('version')!r}")
    missing = [k for k in _REQUIRED_KEYS if k not in doc]
    if missing:
        raise ParameterFileError(f"parameter file missing required entries: {', '.join(missing)}")
    try:
        return VesselParams(
            M=np.array(doc["mass_matrix_kg"], dtype=float),
            D_lin=np.array(doc["linear_damping_kg_per_s"], dtype=float),
            D_quad=np.array(doc["quadratic_damping_kg_per_m"], dtype=float),
            B=np.array(doc["actuator_matrix"], dtype=float),
            thrust_limits=tuple(doc["thrust_limits_N"]),
            rudder_limits=tuple(doc["yaw_moment_limits_N_m"]),
            W=float(doc["width_m"]),
            U_max=float(doc["max_speed_m_per_s"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterFileError):
            raise
        raise ParameterFileError(f"malformed parameter entry: {exc}") from exc


def load_params(path=None):
    """Load vessel parameters; ``None`` gives the packaged default set."""
    if path is None:
        text = resources.files("asvlab.data").joinpath("vessel_default.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterFileError(f"{path or 'default params'}: line {exc.lineno}: {exc.msg}") from exc
    return params_from_dict(doc)


_DEFAULT = None


def default_params():
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_params()
    return _DEFAULT


def rotation_matrix(psi):
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rates(z, tau, p):
    # z = [x, y, psi, u, v, r]; tau = B f (generalized force, already clamped)
    u, v, r = z[3], z[4], z[5]
    c, s = math.cos(z[2]), math.sin(z[2])
    M = p.M
    a1 = M[0, 0] * u + M[0, 1] * v + M[0, 2] * r
    a2 = M[1, 0] * u + M[1, 1] * v + M[1, 2] * r
    cnu = np.array([-a2 * r, a1 * r, a2 * u - a1 * v])
    nu = z[3:]
    rhs = tau - cnu - p.D_lin @ nu - p.D_quad * np.abs(nu) * nu
    out = np.empty(6)
    out[0] = c * u - s * v
    out[1] = s * u + c * v
    out[2] = r
    out[3:] = p.M_inv @ rhs
    return out


def state_derivative(s, f, p):
    """Time derivative [x, y, psi, u, v, r]' for state ``s`` under (clamped) control ``f``."""
    z = s.as_array() if isinstance(s, VesselState) else np.asarray(s, dtype=float)
    fv = f.as_array() if isinstance(f, ControlInput) else np.asarray(f, dtype=float)
    return _rates(z, p.B @ p.clamp(fv), p)


# Fehlberg 4(5) tableau; only the fifth-order weights are used.
_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)
_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)


def rkf45_step(fun, t, y, h):
    """One fixed RKF45 step of ``y' = fun(t, y)``; returns the fifth-order solution."""
    k = []
    for i in range(6):
        yi = y
        for aij, kj in zip(_A[i], k):
            yi = yi + h * aij * kj
        if not np.all(np.isfinite(yi)):
            raise IntegrationError(i, yi)
        ki = fun(t + _C[i] * h, yi)
        if not np.all(np.isfinite(ki)):
            raise IntegrationError(i, yi)
        k.append(ki)
    out = y
    for bi, ki in zip(_B5, k):
        if bi:
            out = out + h * bi * ki
    if not np.all(np.isfinite(out)):
        raise IntegrationError(6, out)
    return out


def step_array(z, f, p, h=DEFAULT_STEP):
    """Array form of :func:`step_rkf45`: ``z`` is [x, y, psi, u, v, r]."""
    if not h > 0:
        raise ValueError("step size must be positive")
    tau = p.B @ p.clamp(f)
    out = rkf45_step(lambda _t, zz: _rates(zz, tau, p), 0.0, np.asarray(z, dtype=float), h)
    out[2] = wrap_angle(out[2])
    return out


def step_rkf45(s, f, p, h=DEFAULT_STEP):
    """Advance ``s`` by ``h`` seconds with zero-order-hold control ``f``."""
    fv = f.as_array() if isinstance(f, ControlInput) else f
    return VesselState.from_array(step_array(s.as_array(), fv, p, h))
