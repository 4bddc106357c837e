"""Smooth arc-length parameterized paths and path-relative tracking errors."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .dynamics import wrap_angle

LOOKAHEAD_DISTANCE = 100.0
ALONG_TRACK_GAIN = 0.05
ARC_TABLE_KNOTS = 1000
COURSE_SPEED_THRESHOLD = 0.05

# 5-point Gauss-Legendre nodes/weights on [-1, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
_GL_XL, _GL_WL = _GL_X.tolist(), _GL_W.tolist()


class Path:
    """PCHIP path through waypoints, reparameterized by arc length.

    Each coordinate is a PCHIP interpolant against cumulative chord length
    ``t``.  A table of cumulative arc length over ``knots`` intervals of ``t``
    brackets the inverse map; inside a bracket the chord parameter is found
    by safeguarded Newton iteration on the Gauss-Legendre arc length.
    """

    def __init__(self, waypoints, knots=ARC_TABLE_KNOTS):
        wp = np.asarray(waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[1] != 2 or len(wp) < 2:
            raise ValueError("need at least two 2-D waypoints")
        if not np.all(np.isfinite(wp)):
            raise ValueError("waypoints must be finite")
        chords = np.hypot(*np.diff(wp, axis=0).T)
        if np.any(chords <= 1e-9):
            raise ValueError("duplicate consecutive waypoints")
        self.waypoints = wp
        wp.setflags(write=False)
        t = np.concatenate([[0.0], np.cumsum(chords)])
        curve = PchipInterpolator(t, wp, axis=0)
        self._curve = curve
        self._dcurve = curve.derivative()
        # piecewise cubic coefficients, highest power first, for scalar evaluation
        self._breaks = t.tolist()
        self._coef = [
            [tuple(curve.c[p, j, :]) for p in range(4)] for j in range(len(t) - 1)
        ]

        tk = np.linspace(0.0, t[-1], knots + 1)
        half = 0.5 * np.diff(tk)
        mid = 0.5 * (tk[1:] + tk[:-1])
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        speed = np.hypot(*self._dcurve(nodes.ravel()).T).reshape(nodes.shape)
        seg = half * (speed @ _GL_W)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        if np.any(np.diff(arc) <= 0):
            raise ValueError("degenerate path: arc-length table not strictly increasing")
        self.arc_table = arc
        self.param_table = tk
        self.length = float(arc[-1])
        self._arc = arc.tolist()
        self._tk = tk.tolist()
        self._cache = (None, None)

    # scalar piecewise-cubic evaluation
    def _piece(self, t):
        j = bisect.bisect_right(self._breaks, t) - 1
        j = min(max(j, 0), len(self._coef) - 1)
        return self._coef[j], t - self._breaks[j]

    def _eval(self, t):
        (a, b, c, d), dt = self._piece(t)
        return ((a[0] * dt + b[0]) * dt + c[0]) * dt + d[0], ((a[1] * dt + b[1]) * dt + c[1]) * dt + d[1]

    def _deval(self, t):
        (a, b, c, _), dt = self._piece(t)
        return (3 * a[0] * dt + 2 * b[0]) * dt + c[0], (3 * a[1] * dt + 2 * b[1]) * dt + c[1]

    def _speed(self, t):
        dx, dy = self._deval(t)
        return math.hypot(dx, dy)

    def _arc_between(self, t0, t1):
        h = 0.5 * (t1 - t0)
        m = 0.5 * (t1 + t0)
        return h * sum(w * self._speed(m + h * x) for x, w in zip(_GL_XL, _GL_WL))

    def clamp(self, omega_bar):
        return min(max(float(omega_bar), 0.0), self.length)

    def _param(self, omega_bar):
        w = self.clamp(omega_bar)
        if self._cache[0] == w:
            return self._cache[1]
        k = bisect.bisect_right(self._arc, w) - 1
        k = min(max(k, 0), len(self._tk) - 2)
        lo, hi = self._tk[k], self._tk[k + 1]
        s0, s1 = self._arc[k], self._arc[k + 1]
        target = w - s0
        t = lo + (hi - lo) * (target / (s1 - s0))
        for _ in range(50):
            f = self._arc_between(self._tk[k], t) - target
            if abs(f) < 1e-11:
                break
            if f > 0:
                hi = t
            else:
                lo = t
            sp = self._speed(t)
            t_new = t - f / sp if sp > 0 else 0.5 * (lo + hi)
            if not lo < t_new < hi:
                t_new = 0.5 * (lo + hi)
            t = t_new
        self._cache = (w, t)
        return t

    def point(self, omega_bar):
        w = self.clamp(omega_bar)
        if w == 0.0:
            return self.waypoints[0].copy()
        if w == self.length:
            return self.waypoints[-1].copy()
        return np.array(self._eval(self._param(w)))

    def points(self, omega_bars):
        return np.array([self.point(w) for w in np.ravel(omega_bars)])

    def derivative(self, omega_bar):
        """d p / d omega_bar: the chord-parameter derivative divided by its speed."""
        dx, dy = self._deval(self._param(omega_bar))
        sp = math.hypot(dx, dy)
        if sp < 1e-12:
            return np.array([math.cos(self.tangent_angle(omega_bar)), math.sin(self.tangent_angle(omega_bar))])
        return np.array([dx / sp, dy / sp])

    def tangent_angle(self, omega_bar):
        t = self._param(omega_bar)
        dx, dy = self._deval(t)
        if math.hypot(dx, dy) < 1e-12:
            # zero-speed knot (both coordinates extremal): use a short chord instead
            a = self.point(omega_bar - 1e-3)
            b = self.point(omega_bar + 1e-3)
            dx, dy = b[0] - a[0], b[1] - a[1]
        return math.atan2(dy, dx)

    def __eq__(self, other):
        return isinstance(other, Path) and np.array_equal(self.waypoints, other.waypoints)

    def __repr__(self):
        return f"Path({len(self.waypoints)} waypoints, length={self.length:.3f})"


def build_path(waypoints):
    return Path(waypoints)


def point(path, omega_bar):
    return path.point(omega_bar)


def tangent_angle(path, omega_bar):
    return path.tangent_angle(omega_bar)


@dataclass(frozen=True)
class PathVariable:
    omega_bar: float
    length: float

    def __post_init__(self):
        object.__setattr__(self, "omega_bar", min(max(float(self.omega_bar), 0.0), float(self.length)))


@dataclass(frozen=True)
class TrackingErrors:
    s: float
    e: float
    chi_err: float
    lookahead_course_err: float


def course_angle(psi, u, v):
    """Course over ground; falls back to heading when nearly stationary."""
    if math.hypot(u, v) > COURSE_SPEED_THRESHOLD:
        return wrap_angle(psi + math.atan2(v, u))
    return psi


def tracking_errors(path, omega_bar, vessel_pos, course, delta_la=LOOKAHEAD_DISTANCE):
    if not delta_la > 0:
        raise ValueError("look-ahead distance must be positive")
    w = path.clamp(omega_bar)
    ref = path.point(w)
    gamma = path.tangent_angle(w)
    dx = float(vessel_pos[0]) - ref[0]
    dy = float(vessel_pos[1]) - ref[1]
    c, s_ = math.cos(gamma), math.sin(gamma)
    along = c * dx + s_ * dy
    cross = -s_ * dx + c * dy

    w_la = path.clamp(w + delta_la)
    look = path.point(w_la)
    lx, ly = look[0] - ref[0], look[1] - ref[1]
    if math.hypot(lx, ly) < 1e-9:
        desired = gamma
    else:
        desired = math.atan2(ly, lx)
    chi_err = wrap_angle(desired - course)
    la_err = wrap_angle(path.tangent_angle(w_la) - course)
    return TrackingErrors(along, cross, chi_err, la_err)


ALONG_TRACK_MODES = ("pullback", "converge")


def advance_path_variable(pv, u, v, chi_err, s, h, gamma_omega=ALONG_TRACK_GAIN, mode="pullback"):
    """Explicit Euler step of the path-variable ODE, clamped to the path.

    ``pullback`` subtracts gamma*s: a reference point behind a vessel that is
    ahead of it (s > 0) is slowed further, so on a straight path s grows like
    exp(gamma*t).  ``converge`` adds gamma*s, which makes s decay instead.
    """
    if not gamma_omega > 0:
        raise ValueError("along-track gain must be positive")
    if mode not in ALONG_TRACK_MODES:
        raise ValueError(f"unknown along-track mode {mode!r}")
    sign = -1.0 if mode == "pullback" else 1.0
    rate = math.hypot(u, v) * math.cos(chi_err) + sign * gamma_omega * s
    return PathVariable(pv.omega_bar + h * rate, pv.length)
