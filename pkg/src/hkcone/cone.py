"""Geometry of the cone over a Euclidean domain.

A cone point ``[x, r]`` carries a position ``x`` and a radius ``r >= 0``,
the square root of a mass.  All points with ``r = 0`` are identified with
the tip.  For transport weight ``alpha`` and reaction weight ``beta`` the
squared distance between ``[x0, r0]`` and ``[x1, r1]`` is

.. math::

    \\frac{4}{\\beta}\\Big(r_0^2 + r_1^2
        - 2 r_0 r_1 \\cos_\\pi\\big(\\sqrt{\\beta/(4\\alpha)}\\,|x_1 - x_0|\\big)\\Big),

with the truncated cosine ``cos_b(a) = cos(min(|a|, b))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "Params",
    "ConePoint",
    "ConeGeodesicSample",
    "cos_trunc",
    "cone_cost",
    "cone_dist",
    "cone_geodesic",
    "interpolate_records",
    "one_mass_point_cost",
    "one_mass_point_curve",
    "curve_length_1mp",
]


@dataclass(frozen=True)
class Params:
    """Transport weight ``alpha`` and reaction weight ``beta``.

    Both must be nonnegative.  ``alpha = beta = 0`` describes a degenerate
    metric and is only accepted with ``allow_degenerate=True``.
    """

    alpha: float = 1.0
    beta: float = 4.0
    allow_degenerate: bool = False

    def __post_init__(self) -> None:
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if self.alpha == 0.0 and self.beta == 0.0 and not self.allow_degenerate:
            raise ValueError("alpha = beta = 0 requires allow_degenerate=True")

    @property
    def positive(self) -> bool:
        return self.alpha > 0.0 and self.beta > 0.0

    @property
    def scale(self) -> float:
        """Factor ``sqrt(beta / (4 alpha))`` mapping lengths to angles."""
        self.require_positive()
        return math.sqrt(self.beta / (4.0 * self.alpha))

    @property
    def lam(self) -> float:
        """Weight ``4 / beta`` of the entropy terms."""
        if self.beta <= 0.0:
            raise ValueError("beta must be > 0")
        return 4.0 / self.beta

    def require_positive(self) -> None:
        if not self.positive:
            raise ValueError(
                f"operation needs alpha > 0 and beta > 0, got {self.alpha}, {self.beta}"
            )


@dataclass(frozen=True, eq=True)
class ConePoint:
    """A point ``[x, r]`` of the cone.

    A point with ``r == 0`` is the tip; its position is discarded, so all
    tips compare equal.  Use :meth:`ConePoint.tip` to build one directly.
    """

    x: Optional[Tuple[float, ...]]
    r: float

    def __post_init__(self) -> None:
        r = float(self.r)
        if not (math.isfinite(r) and r >= 0.0):
            raise ValueError(f"radius must be finite and >= 0, got {self.r!r}")
        object.__setattr__(self, "r", r)
        if r == 0.0:
            object.__setattr__(self, "x", None)
        else:
            if self.x is None:
                raise ValueError("a non-tip cone point needs a position")
            object.__setattr__(self, "x", tuple(float(v) for v in np.ravel(self.x)))

    @classmethod
    def tip(cls) -> "ConePoint":
        return cls(None, 0.0)

    @property
    def is_tip(self) -> bool:
        return self.r == 0.0

    def position(self) -> np.ndarray:
        if self.x is None:
            raise ValueError("the tip has no position")
        return np.asarray(self.x, dtype=float)


@dataclass(frozen=True)
class ConeGeodesicSample:
    """Point ``z`` on a cone geodesic with ``r_sq = z.r**2`` and transport fraction ``rho``."""

    z: ConePoint
    r_sq: float
    rho: float


def cos_trunc(a, b):
    """Truncated cosine ``cos(min(|a|, b))``."""
    if np.ndim(b) == 0 and b <= 0:
        raise ValueError("truncation b must be > 0")
    return np.cos(np.minimum(np.abs(a), b))


def cone_cost(L_sq, b0, b1, p: Params):
    """Squared cone distance between ``[x0, b0]`` and ``[x1, b1]`` with ``|x1 - x0|^2 = L_sq``.

    For ``alpha, beta > 0`` this is the cosine formula of the module
    docstring and broadcasts over array arguments.  The boundary cases are
    the limits of the one-mass-point cost:

    * ``alpha = 0``: ``(4/beta) (b0 - b1)^2`` if ``L = 0``, else ``inf``;
    * ``beta = 0``: ``L^2 b0^2 / alpha`` if ``b0 = b1``, else ``inf``;
    * ``alpha = beta = 0``: ``0`` if ``L = 0`` and ``b0 = b1``, else ``inf``.
    """
    if p.positive:
        L = np.sqrt(np.asarray(L_sq, dtype=float))
        b0 = np.asarray(b0, dtype=float)
        b1 = np.asarray(b1, dtype=float)
        # (b0 - b1)^2 + 4 b0 b1 sin^2(l/2): the cosine form cancels for nearby points
        half = 0.5 * np.minimum(p.scale * L, math.pi)
        val = (4.0 / p.beta) * ((b0 - b1) ** 2 + 4.0 * b0 * b1 * np.sin(half) ** 2)
        return float(val) if val.ndim == 0 else val
    L_sq, b0, b1 = float(L_sq), float(b0), float(b1)
    if p.alpha == 0.0 and p.beta > 0.0:
        return (4.0 / p.beta) * (b0 - b1) ** 2 if L_sq == 0.0 else math.inf
    if p.beta == 0.0 and p.alpha > 0.0:
        return L_sq * b0 * b0 / p.alpha if b0 == b1 else math.inf
    return 0.0 if (L_sq == 0.0 and b0 == b1) else math.inf


def cone_dist(z0: ConePoint, z1: ConePoint, p: Params = Params()) -> float:
    """Cone distance between two cone points."""
    if z0.is_tip or z1.is_tip:
        L_sq = 0.0
    else:
        d = z1.position() - z0.position()
        L_sq = float(d @ d)
    return math.sqrt(cone_cost(L_sq, z0.r, z1.r, p))


def interpolate_records(s: float, x0, r0, x1, r1, scale: float):
    """Vectorized geodesic interpolator for arrays of cone point pairs.

    Parameters
    ----------
    s : float
        Curve parameter in ``[0, 1]``.
    x0, x1 : ndarray, shape (k, d)
        Positions; rows belonging to a tip (``r == 0``) are never read.
    r0, r1 : ndarray, shape (k,)
        Radii.
    scale : float
        ``sqrt(beta / (4 alpha))``; distances are measured as ``scale * |x1 - x0|``.

    Returns
    -------
    X : ndarray, shape (k, d)
        Interpolated positions (NaN where the result is the tip of a tip-tip pair).
    R_sq : ndarray, shape (k,)
        Squared radii.
    rho : ndarray, shape (k,)
        Transport fractions.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    r1 = np.asarray(r1, dtype=float)
    tip0 = r0 == 0.0
    tip1 = r1 == 0.0
    both = ~tip0 & ~tip1
    diff = np.where(both[:, None], x1 - x0, 0.0)
    ell = scale * np.sqrt(np.sum(diff * diff, axis=1))
    ell_c = np.minimum(ell, math.pi)
    a, b = (1.0 - s) * r0, s * r1
    R_sq = (a - b) ** 2 + np.where(ell_c < math.pi, 4.0 * a * b * np.cos(0.5 * ell_c) ** 2, 0.0)

    rho = np.zeros_like(r0)
    if s == 1.0:
        rho[:] = 1.0
    elif s > 0.0:
        R = np.sqrt(R_sq)
        short = both & (ell > 0.0) & (ell < math.pi) & (R > 0.0)
        # atan2 rather than arccos, which loses half the digits near angle 0
        angle = np.arctan2(b[short] * np.sin(ell[short]), a[short] + b[short] * np.cos(ell[short]))
        rho[short] = angle / ell[short]
        zero = both & (ell == 0.0) & (a + b > 0.0)
        rho[zero] = b[zero] / (a[zero] + b[zero])
        far = both & (ell >= math.pi)
        rho[far] = np.where(b[far] - a[far] >= 0.0, 1.0, 0.0)
    rho[tip0 & ~tip1] = 1.0
    rho[tip1] = 0.0
    rho = np.clip(rho, 0.0, 1.0)

    X = (1.0 - rho)[:, None] * np.where(tip0[:, None], 0.0, x0) + rho[:, None] * np.where(
        tip1[:, None], 0.0, x1
    )
    X = np.where((tip0 & ~tip1)[:, None], x1, X)
    X = np.where((tip1 & ~tip0)[:, None], x0, X)
    X = np.where((tip0 & tip1)[:, None], np.nan, X)
    return X, R_sq, rho


def cone_geodesic(s: float, z0: ConePoint, z1: ConePoint, p: Params = Params()) -> ConeGeodesicSample:
    """Point at parameter ``s`` on the constant-speed cone geodesic from ``z0`` to ``z1``.

    For scaled distance ``l < pi`` the position moves by the fraction
    ``rho = arccos(((1-s) r0 + s r1 cos l) / R) / l`` of the segment; for
    ``l >= pi`` the geodesic runs through the tip and ``rho`` jumps from 0
    to 1 once ``s r1 >= (1-s) r0`` (a tie counts as the jump).  If the
    interpolated radius vanishes the returned point is the tip.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s!r}")
    if s == 0.0:
        return ConeGeodesicSample(z0, z0.r * z0.r, 0.0)
    if s == 1.0:
        return ConeGeodesicSample(z1, z1.r * z1.r, 1.0)
    dim = len(z0.x) if z0.x is not None else (len(z1.x) if z1.x is not None else 1)
    nan = np.full((1, dim), np.nan)
    x0 = nan if z0.is_tip else z0.position()[None, :]
    x1 = nan if z1.is_tip else z1.position()[None, :]
    X, R_sq, rho = interpolate_records(
        s, x0, np.array([z0.r]), x1, np.array([z1.r]), p.scale
    )
    r_sq = float(R_sq[0])
    z = ConePoint(X[0] if r_sq > 0.0 else None, math.sqrt(r_sq))
    return ConeGeodesicSample(z, z.r * z.r, float(rho[0]))


def one_mass_point_cost(L_sq: float, a0: float, a1: float, p: Params = Params()) -> float:
    """Minimal squared length of a one-mass-point curve from ``a0 δ_x0`` to ``a1 δ_x1``."""
    if L_sq < 0 or a0 < 0 or a1 < 0:
        raise ValueError("L_sq, a0 and a1 must be >= 0")
    return cone_cost(L_sq, math.sqrt(a0), math.sqrt(a1), p)


def one_mass_point_curve(s, L: float, a0: float, a1: float):
    """Optimal mass and transport fraction of a single moving Dirac (``alpha=1, beta=4``).

    Returns ``(a, rho)`` with
    ``a(s) = (1-s)^2 a0 + s^2 a1 + 2 s (1-s) sqrt(a0 a1) cos L`` and
    ``rho(s) L`` the arctangent of ``s sin L sqrt(a1)`` over
    ``(1-s) sqrt(a0) + s cos L sqrt(a1)``, shifted by ``pi`` when that
    denominator is negative and equal to ``pi/2`` when it vanishes.
    Accepts scalar or array ``s``.
    """
    if not 0.0 <= L < math.pi:
        raise ValueError(f"L must satisfy 0 <= L < pi, got {L!r}")
    if a0 <= 0 or a1 <= 0:
        raise ValueError("a0 and a1 must be > 0")
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr < 0.0) | (s_arr > 1.0)):
        raise ValueError("s must lie in [0, 1]")
    q0, q1 = math.sqrt(a0), math.sqrt(a1)
    a = (1 - s_arr) ** 2 * a0 + s_arr**2 * a1 + 2 * s_arr * (1 - s_arr) * q0 * q1 * math.cos(L)
    if L == 0.0:
        rho = s_arr * q1 / ((1 - s_arr) * q0 + s_arr * q1)
    else:
        num = s_arr * math.sin(L) * q1
        den = (1 - s_arr) * q0 + s_arr * math.cos(L) * q1
        # arctan2 with num >= 0 realizes the three branches in den
        rho = np.arctan2(num, den) / L
    if a.ndim == 0:
        return float(a), float(rho)
    return a, rho


def curve_length_1mp(a_samples: Sequence[float], rho_samples: Sequence[float], L: float,
                     p: Params = Params()) -> float:
    """Squared length of a one-mass-point curve from uniform samples on ``[0, 1]``.

    Integrates ``(L^2/alpha) rho'^2 a + a'^2 / (beta a)`` with second-order
    finite differences and the trapezoidal rule.  The reaction term is
    evaluated as ``(4/beta) (d sqrt(a)/ds)^2``, which is the same integrand
    and stays finite where ``a`` touches zero.
    """
    a = np.asarray(a_samples, dtype=float)
    rho = np.asarray(rho_samples, dtype=float)
    if a.ndim != 1 or a.shape != rho.shape or a.size < 3:
        raise ValueError("need matching 1-D sample arrays with at least 3 points")
    if np.any(a < 0):
        raise ValueError("masses must be >= 0")
    h = 1.0 / (a.size - 1)
    transport_moves = np.ptp(rho) > 0 and L != 0.0
    if p.alpha == 0.0 and transport_moves:
        raise ValueError("alpha = 0 forbids a moving transport fraction")
    if p.beta == 0.0 and np.ptp(a) > 0:
        raise ValueError("beta = 0 forbids a changing mass")
    integrand = np.zeros_like(a)
    if transport_moves:
        drho = np.gradient(rho, h, edge_order=2)
        integrand += (L * L / p.alpha) * drho**2 * a
    if p.beta > 0.0:
        db = np.gradient(np.sqrt(a), h, edge_order=2)
        integrand += (4.0 / p.beta) * db**2
    return float(np.trapezoid(integrand, dx=h))
