"""Geodesic between the characteristic functions of [-pi/4, pi/4] and [pi/2, pi].

The transported parts live on ``I0 = ]0, pi/4[`` and ``I1 = ]pi/2, 3pi/4[``
and are coupled through a monotone map ``h`` solving

    h'' = 2 (h'^2 + h') tan(h - x),   h(0) = pi/2,   h(pi/4) = 3pi/4.

With ``w = pi/2 + x - h`` the equation has the first integral
``sqrt(1 - w') / (2 - w') = c sin w``.  The boundary value problem is
solved by shooting on ``c``; an independent route fixes the maximum
``w_*`` of ``w`` through ``K(sin w_*) sin w_* = pi/4`` and gives
``c_* = 1 / (2 sin w_*)``.  The two values of ``c`` must agree.

The map is singular at both ends (``h'(0) = 0`` and ``h'(pi/4) = inf``), so
the integration starts from a series at ``x = delta``, switches to ``x`` as a
function of ``h`` once ``h' >= 1``, and finishes the last stretch with the
first integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

__all__ = [
    "CharConfig",
    "CharGeodesic",
    "ShootingFailure",
    "elliptic_k",
    "calibrate_w_star",
    "shoot",
    "char_function_geodesic",
]

QUARTER = math.pi / 4


class ShootingFailure(RuntimeError):
    """The shooting bracket does not straddle the boundary condition."""


@dataclass(frozen=True)
class CharConfig:
    #: integrator step, in x before the switch and in h after it
    step: float = 1e-4
    #: start of the integration; [0, delta] is covered by a series
    delta: float = 1e-2
    #: once w drops below this the remaining stretch uses the first integral
    w_tail: float = 1e-2
    #: bracket for the first-integral constant c (w_* = arcsin(1/(2c)))
    c_bracket: Tuple[float, float] = (0.55, 5.0)
    xtol: float = 1e-12


def elliptic_k(k: float) -> float:
    """Complete elliptic integral of the first kind, modulus ``k``, via the AGM."""
    if not 0.0 <= k < 1.0:
        raise ValueError("modulus must lie in [0, 1)")
    a, b = 1.0, math.sqrt(1.0 - k * k)
    # quadratic convergence; the cap guards against a one-ulp oscillation
    for _ in range(64):
        if abs(a - b) <= 4 * np.finfo(float).eps * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def calibrate_w_star(tol: float = 1e-15) -> Tuple[float, float]:
    """``(w_*, c_*)`` from ``K(sin w_*) sin w_* = pi/4`` by bisection."""
    lo, hi = 1e-6, math.pi / 2 - 1e-9
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if elliptic_k(math.sin(mid)) * math.sin(mid) < QUARTER:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)
    return w, 1.0 / (2.0 * math.sin(w))


def _inv_minus_g_minus(omega: float, c: float) -> float:
    """``1 / (-g_-(c sin omega))``, the falling-branch ``dx/dw``, smooth at 0."""
    a = c * math.sin(omega)
    s = math.sqrt(max(1.0 - 4.0 * a * a, 0.0))
    return 2.0 * a * a / (s * (1.0 + s))


def _minus_g_minus(omega: float, c: float) -> float:
    a = c * math.sin(omega)
    s = math.sqrt(max(1.0 - 4.0 * a * a, 0.0))
    return s * (1.0 + s) / (2.0 * a * a)


def _series(x: float, c: float) -> Tuple[float, float]:
    """``(w, w')`` near ``x = 0`` to ``O(x^9)``."""
    c2 = c * c
    a3 = -c2 / 3.0
    a5 = -c2 * (4.0 * c2 - 1.0) / 15.0
    a7 = -2.0 * c2 * (43.0 * c2 * c2 - 17.0 * c2 + 1.0) / 315.0
    w = x + a3 * x ** 3 + a5 * x ** 5 + a7 * x ** 7
    dw = 1.0 + 3 * a3 * x ** 2 + 5 * a5 * x ** 4 + 7 * a7 * x ** 6
    return w, dw


def _rk4(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2, [yi + dt / 2 * ki for yi, ki in zip(y, k1)])
    k3 = f(t + dt / 2, [yi + dt / 2 * ki for yi, ki in zip(y, k2)])
    k4 = f(t + dt, [yi + dt * ki for yi, ki in zip(y, k3)])
    return [yi + dt / 6 * (a + 2 * b + 2 * cc + d) for yi, a, b, cc, d in zip(y, k1, k2, k3, k4)]


def _rising(x, y):
    # state (h, p), p = h'
    h, p = y
    w = math.pi / 2 + x - h
    return [p, 2.0 * (p * p + p) * math.cos(w) / math.sin(w)]


def _falling(h, y):
    # state (x, q), q = dx/dh = 1/h'
    x, q = y
    w = math.pi / 2 + x - h
    return [q, -2.0 * (q + q * q) * math.cos(w) / math.sin(w)]


@dataclass(frozen=True)
class Trajectory:
    x: np.ndarray
    h: np.ndarray
    #: h' (``inf`` only at the right end)
    p: np.ndarray
    #: x at which w returns to 0; the boundary condition asks for pi/4
    x_end: float
    #: largest w met along the integration
    w_max: float
    #: samples produced by the series or the integrator (not the closing quadrature)
    integrated: np.ndarray


def shoot(c: float, cfg: CharConfig = CharConfig(), samples: bool = True) -> Trajectory:
    """Integrate from ``h(0) = pi/2`` with first-integral constant ``c``."""
    if not c > 0.5:
        raise ValueError("c must exceed 1/2")
    dt = cfg.step
    xs: List[float] = []
    hs: List[float] = []
    ps: List[float] = []
    if samples:
        for x in np.linspace(0.0, cfg.delta, 101)[:-1]:
            w, dw = _series(float(x), c)
            xs.append(float(x))
            hs.append(math.pi / 2 + x - w)
            ps.append(1.0 - dw)
    x = cfg.delta
    w, dw = _series(x, c)
    y = [math.pi / 2 + x - w, 1.0 - dw]
    w_max = w
    guard = int(10.0 / dt)
    while y[1] < 1.0:
        if samples:
            xs.append(x)
            hs.append(y[0])
            ps.append(y[1])
        y = _rk4(_rising, x, y, dt)
        x += dt
        w_max = max(w_max, math.pi / 2 + x - y[0])
        guard -= 1
        if guard < 0 or not math.isfinite(y[1]):
            raise ShootingFailure(f"rising branch did not turn for c={c!r}")
    h = y[0]
    z = [x, 1.0 / y[1]]
    w = math.pi / 2 + x - h
    while w >= cfg.w_tail:
        if samples:
            xs.append(z[0])
            hs.append(h)
            ps.append(1.0 / z[1])
        z = _rk4(_falling, h, z, dt)
        h += dt
        w = math.pi / 2 + z[0] - h
        w_max = max(w_max, w)
        guard -= 1
        if guard < 0 or not 0.0 < z[1] < math.inf or w > math.pi / 2:
            raise ShootingFailure(f"falling branch broke down for c={c!r}")
    x_last = z[0]
    n_int = len(xs)
    x_end = x_last + quad(_inv_minus_g_minus, 0.0, w, args=(c,), epsabs=1e-15, epsrel=1e-13)[0]
    if samples:
        for om in np.linspace(w, 0.0, 60)[:-1]:
            xo = x_last + quad(_inv_minus_g_minus, om, w, args=(c,), epsabs=1e-15, epsrel=1e-13)[0]
            xs.append(xo)
            hs.append(math.pi / 2 + xo - om)
            ps.append(1.0 + _minus_g_minus(om, c))
        xs.append(x_end)
        hs.append(math.pi / 2 + x_end)
        ps.append(math.inf)
    integrated = np.arange(len(xs)) < n_int
    return Trajectory(np.array(xs), np.array(hs), np.array(ps), x_end, w_max, integrated)


@dataclass(frozen=True)
class CharGeodesic:
    """Monotone coupling map, densities and calibration of the transport part."""

    x: np.ndarray
    h: np.ndarray
    #: h' on the samples
    dh: np.ndarray
    rho0: np.ndarray
    #: rho1 at the points h(x)
    rho1: np.ndarray
    #: first-integral constant found by shooting
    c_star: float
    #: maximum of w along the shot trajectory
    w_star: float
    #: the same two quantities from the elliptic calibration
    c_elliptic: float
    w_elliptic: float
    #: |h(pi/4) - 3pi/4| of the final shot
    boundary_mismatch: float
    #: samples coming from the series or the integrator
    integrated: np.ndarray

    def rho0_at(self, x) -> np.ndarray:
        return PchipInterpolator(self.x, self.rho0)(x)

    def rho1_at(self, y) -> np.ndarray:
        return PchipInterpolator(self.h, self.rho1)(y)

    def optimality_gap(self, n: int = 200) -> Tuple[float, float]:
        """Check ``rho0(x) rho1(y) >= cos_{pi/2}(y - x)^2`` on an ``n x n`` grid.

        Returns ``(violation, slack)``: the largest amount by which the
        inequality fails, and the largest over ``x`` of the smallest gap
        over ``y`` (zero in the limit, since equality holds at ``y = h(x)``).
        """
        xg = (np.arange(n) + 0.5) / n * QUARTER
        yg = math.pi / 2 + (np.arange(n) + 0.5) / n * QUARTER
        d = np.minimum(np.abs(yg[None, :] - xg[:, None]), math.pi / 2)
        gap = self.rho0_at(xg)[:, None] * self.rho1_at(yg)[None, :] - np.cos(d) ** 2
        return float(max(0.0, -gap.min())), float(gap.min(axis=1).max())

    def equality_residual(self) -> Tuple[float, float]:
        """``(max |rho0 rho1(h) - cos(h - x)^2|, max |h'_fd / h' - 1|)``.

        Since ``rho0^2 = h' cos(h - x)^2`` holds for the state ``h'``, the
        second number measures that identity with ``h'`` replaced by finite
        differences of the samples produced by the integrator.  The series
        stretch is skipped: there ``h - pi/2 = O(x^3)`` is lost in rounding.
        """
        cos2 = np.cos(self.h - self.x) ** 2
        a = np.abs(self.rho0 * self.rho1 - cos2)[1:-1].max()
        sel = self.integrated & (self.x >= self.x[self.integrated][100])
        dh_fd = np.gradient(self.h[sel], self.x[sel], edge_order=2)
        b = np.abs(dh_fd[1:-1] / self.dh[sel][1:-1] - 1.0).max()
        return float(a), float(b)

    def marginal_masses(self) -> Tuple[float, float]:
        """``(int_I0 rho0 dx, int_I1 rho1 dy)`` by Simpson's rule on the samples."""
        return float(simpson(self.rho0, x=self.x)), float(simpson(self.rho1, x=self.h))

    def frame(self, s: float) -> Tuple[np.ndarray, np.ndarray]:
        """Density of the transported part at time ``s`` as ``(y, f(s, y))``.

        ``f(s, Y(s, x)) = Rbar(s, x)^2 rho0(x) / d_x Y(s, x)`` with the
        squared radius written without the singular ``r0 = rho0^(-1/2)`` and
        ``d_x Y`` differentiated in closed form through the ODE.  The two
        end samples, where ``h'`` is 0 or infinite, are left out.
        """
        if not 0.0 <= s <= 1.0:
            raise ValueError("s must lie in [0, 1]")
        x, p, rho0 = self.x[1:-1], self.dh[1:-1], self.rho0[1:-1]
        w = math.pi / 2 + x - self.h[1:-1]
        sin_w, cos_w = np.sin(w), np.cos(w)
        sq = np.sqrt(p)
        A = (1 - s) + s * sq * sin_w
        B = s * sq * cos_w
        Y = x + np.arctan2(B, A)
        # (sqrt p)' = sqrt(p) (p + 1) cot w and w' = 1 - p
        dsq = sq * (p + 1) * cos_w / sin_w
        dY = 1 + s * (dsq * (1 - s) * cos_w - sq * (1 - p) * ((1 - s) * sin_w + s * sq)) / (A * A + B * B)
        mass = (1 - s) ** 2 + s * s * p + 2 * s * (1 - s) * rho0
        return Y, mass / dY

    def frame_rows(self, s_values: Sequence[float], wing_points: int = 51) -> List[Tuple[float, float, float]]:
        """Rows ``(s, y, density)`` with the pure reaction wings on ``[-pi/4, 0]`` and ``[3pi/4, pi]``."""
        rows = []
        for s in s_values:
            s = float(s)
            for y in np.linspace(-QUARTER, 0.0, wing_points):
                rows.append((s, float(y), (1 - s) ** 2))
            Y, f = self.frame(s)
            rows.extend((s, float(y), float(v)) for y, v in zip(Y, f))
            for y in np.linspace(3 * QUARTER, math.pi, wing_points):
                rows.append((s, float(y), s * s))
        return rows


def char_function_geodesic(cfg: CharConfig = CharConfig()) -> CharGeodesic:
    """Solve the coupling map by shooting and calibrate it against the elliptic route."""
    lo, hi = cfg.c_bracket

    def mismatch(c):
        return shoot(c, cfg, samples=False).x_end - QUARTER

    f_lo, f_hi = mismatch(lo), mismatch(hi)
    if f_lo * f_hi > 0:
        raise ShootingFailure(f"bracket {cfg.c_bracket} gives mismatches {f_lo!r}, {f_hi!r}")
    c = brentq(mismatch, lo, hi, xtol=cfg.xtol, rtol=4 * np.finfo(float).eps)
    traj = shoot(c, cfg)
    w = math.pi / 2 + traj.x - traj.h
    sin_w = np.sin(w)
    sq = np.sqrt(traj.p)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho0 = sq * sin_w
        rho1 = np.where(traj.p > 0, sin_w / sq, 1.0 / c)
    # limits at the singular ends
    rho0[-1] = 1.0 / c
    rho1[-1] = 0.0
    w_e, c_e = calibrate_w_star()
    return CharGeodesic(
        x=traj.x, h=traj.h, dh=traj.p, rho0=rho0, rho1=rho1,
        c_star=c, w_star=traj.w_max, c_elliptic=c_e, w_elliptic=w_e,
        boundary_mismatch=abs(traj.x_end - QUARTER), integrated=traj.integrated,
    )
