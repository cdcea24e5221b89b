"""HK geodesics: projected cone geodesics of plans and explicit families.

Curves are stored as transport records plus pure annihilation/creation
parts, so that ``eval`` is closed form and the mass identities are exact
up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .cone import Params, cone_cost, interpolate_records
from .measure import ConePlan, DiscreteMeasure

__all__ = [
    "GeodesicCurve",
    "PotentialField",
    "MassProfile",
    "geodesic_from_plan",
    "mass_profile",
    "hellinger_geodesic",
    "dilation_geodesic",
    "dilation_potential",
    "dirac_line_example",
    "two_dirac_family",
    "hamilton_jacobi_residual",
    "continuity_residual",
    "monomial_tests",
    "frame_rows",
    "DEFAULT_FRAMES",
    "ZERO_FIELD",
]

DEFAULT_FRAMES = tuple(k / 20 for k in range(21))


@dataclass(frozen=True)
class GeodesicCurve:
    """Curve ``s -> sum g R(s)^2 delta_X(s) + (1-s)^2 pure0 + s^2 pure1``.

    ``x0, r0, x1, r1, g`` hold the transport records (both radii positive).
    """

    x0: np.ndarray
    r0: np.ndarray
    x1: np.ndarray
    r1: np.ndarray
    g: np.ndarray
    pure0: DiscreteMeasure
    pure1: DiscreteMeasure
    params: Params = field(default_factory=Params)

    @property
    def dim(self) -> int:
        return self.x0.shape[1]

    def eval(self, s: float) -> DiscreteMeasure:
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"s must lie in [0, 1], got {s!r}")
        X, R_sq, _ = interpolate_records(s, self.x0, self.r0, self.x1, self.r1, self.params.scale)
        positions = np.vstack([X, self.pure0.positions, self.pure1.positions])
        masses = np.concatenate([
            R_sq * self.g,
            (1.0 - s) ** 2 * self.pure0.masses,
            s * s * self.pure1.masses,
        ])
        return DiscreteMeasure(positions, masses, dim=self.dim)

    def m_star(self) -> float:
        """``sum g r0 r1 cos_pi(l)`` over the transport records."""
        ell = self.params.scale * np.linalg.norm(self.x1 - self.x0, axis=1)
        return float(np.sum(self.g * self.r0 * self.r1 * np.cos(np.minimum(ell, math.pi))))

    def cost(self) -> float:
        """Cone cost of the underlying plan, i.e. the squared length of the curve."""
        p = self.params
        L_sq = np.sum((self.x1 - self.x0) ** 2, axis=1)
        moving = float(np.sum(self.g * cone_cost(L_sq, self.r0, self.r1, p)))
        return moving + p.lam * (self.pure0.total_mass + self.pure1.total_mass)


@dataclass(frozen=True)
class PotentialField:
    """Potential ``xi(s, x)`` and its gradient, both vectorized over rows of ``x``."""

    xi: Callable[[float, np.ndarray], np.ndarray]
    grad: Callable[[float, np.ndarray], np.ndarray]

    def sample(self, s: float, x) -> Tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.xi(s, x), self.grad(s, x)


ZERO_FIELD = PotentialField(
    lambda s, x: np.zeros(len(x)), lambda s, x: np.zeros_like(np.asarray(x, dtype=float))
)


def _empty(dim: int) -> DiscreteMeasure:
    return DiscreteMeasure.zero(dim)


def geodesic_from_plan(gamma: ConePlan, p: Params = Params()) -> GeodesicCurve:
    """Project the cone geodesics of the plan ``gamma``."""
    both = (gamma.r0 > 0) & (gamma.r1 > 0)
    only0 = (gamma.r0 > 0) & (gamma.r1 == 0)
    only1 = (gamma.r0 == 0) & (gamma.r1 > 0)
    dim = gamma.dim
    return GeodesicCurve(
        np.array(gamma.x0[both]).reshape(-1, dim),
        np.array(gamma.r0[both]),
        np.array(gamma.x1[both]).reshape(-1, dim),
        np.array(gamma.r1[both]),
        np.array(gamma.g[both]),
        DiscreteMeasure(gamma.x0[only0], gamma.g[only0] * gamma.r0[only0] ** 2, dim=dim),
        DiscreteMeasure(gamma.x1[only1], gamma.g[only1] * gamma.r1[only1] ** 2, dim=dim),
        p,
    )


@dataclass(frozen=True)
class MassProfile:
    m0: float
    m1: float
    m_star: float
    hk_sq: float
    #: worst |m(s) - ((1-s)^2 m0 + s^2 m1 + 2 s(1-s) m_star)|
    quadratic_dev: float
    #: worst |m(s) - ((1-s) m0 + s m1 - (beta/4) s(1-s) hk_sq)|
    identity_dev: float
    #: worst violation of m0 m1/(m0+m1) <= m(s) <= ((1-s) sqrt(m0) + s sqrt(m1))^2
    bound_violation: float

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def mass_profile(curve: GeodesicCurve, hk_sq: Optional[float] = None,
                 s_grid: Sequence[float] = tuple(k / 20 for k in range(21))) -> MassProfile:
    """Total mass along the curve against its quadratic law and bounds.

    ``hk_sq`` defaults to the cone cost of the curve's plan.
    """
    if hk_sq is None:
        hk_sq = curve.cost()
    m0 = curve.eval(0.0).total_mass
    m1 = curve.eval(1.0).total_mass
    ms = curve.m_star()
    theta = curve.params.beta / 4.0
    lower = m0 * m1 / (m0 + m1) if m0 + m1 > 0 else 0.0
    quad = ident = bound = 0.0
    for s in s_grid:
        m = curve.eval(float(s)).total_mass
        quad = max(quad, abs(m - ((1 - s) ** 2 * m0 + s * s * m1 + 2 * s * (1 - s) * ms)))
        ident = max(ident, abs(m - ((1 - s) * m0 + s * m1 - theta * s * (1 - s) * hk_sq)))
        upper = ((1 - s) * math.sqrt(m0) + s * math.sqrt(m1)) ** 2
        bound = max(bound, lower - m, m - upper)
    return MassProfile(m0, m1, ms, float(hk_sq), quad, ident, max(bound, 0.0))


def hellinger_geodesic(mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: Params = Params()) -> GeodesicCurve:
    """Pure reaction geodesic: square roots of the masses interpolate linearly."""
    if mu0.dim != mu1.dim:
        raise ValueError("dimension mismatch")
    dim = mu0.dim
    index1 = {tuple(x): j for j, x in enumerate(mu1.positions)}
    shared0, shared1 = [], []
    for i, x in enumerate(mu0.positions):
        j = index1.get(tuple(x))
        if j is not None:
            shared0.append(i)
            shared1.append(j)
    only0 = np.setdiff1d(np.arange(mu0.n), shared0)
    only1 = np.setdiff1d(np.arange(mu1.n), shared1)
    pos = mu0.positions[shared0].reshape(-1, dim)
    return GeodesicCurve(
        pos.copy(), np.sqrt(mu0.masses[shared0]), pos.copy(), np.sqrt(mu1.masses[shared1]),
        np.ones(len(shared0)),
        DiscreteMeasure(mu0.positions[only0], mu0.masses[only0], dim=dim),
        DiscreteMeasure(mu1.positions[only1], mu1.masses[only1], dim=dim),
        p,
    )


def dilation_geodesic(mu1: DiscreteMeasure, y0, p: Params = Params()) -> GeodesicCurve:
    """Geodesic that concentrates ``mu1`` into a single Dirac at ``y0`` as ``s -> 0``.

    An atom at scaled distance ``l < pi/2`` from ``y0`` travels on the record
    ``([y0, cos l], [x, 1])`` with weight ``m``; farther atoms are created by
    pure reaction.
    """
    p.require_positive()
    y0 = np.asarray(y0, dtype=float).reshape(mu1.dim)
    ell = p.scale * np.linalg.norm(mu1.positions - y0, axis=1)
    inside = ell < math.pi / 2
    k = int(inside.sum())
    return GeodesicCurve(
        np.tile(y0, (k, 1)), np.cos(ell[inside]), mu1.positions[inside].copy(), np.ones(k),
        mu1.masses[inside].copy(), _empty(mu1.dim),
        DiscreteMeasure(mu1.positions[~inside], mu1.masses[~inside], dim=mu1.dim),
        p,
    )


def dilation_potential(y0, p: Params = Params()) -> PotentialField:
    """``xi = (2/beta) zeta(scale |x - y0|) / s`` with ``zeta(u) = sin(min(u, pi/2))^2``."""
    y0 = np.asarray(y0, dtype=float)
    k, c = p.scale, 2.0 / p.beta

    def xi(s, x):
        u = np.minimum(k * np.linalg.norm(x - y0, axis=1), math.pi / 2)
        return c * np.sin(u) ** 2 / s

    def grad(s, x):
        d = x - y0
        n = np.linalg.norm(d, axis=1)
        u = k * n
        # d/dx sin^2(k|x|) = k sin(2k|x|) x/|x|, zero outside the cap
        coef = np.where((u < math.pi / 2) & (n > 0), k * np.sin(2 * u) / np.where(n > 0, n, 1.0), 0.0)
        return c * coef[:, None] * d / s

    return PotentialField(xi, grad)


def dirac_line_example(n: int = 30) -> Tuple[DiscreteMeasure, np.ndarray]:
    """``n`` unit Diracs on the segment from (1, 0) to (1, 2) and the center 0."""
    if n < 2:
        raise ValueError("need at least two atoms")
    t = np.arange(n) / (n - 1)
    pos = np.column_stack([np.ones(n), 2.0 * t])
    return DiscreteMeasure(pos, np.ones(n)), np.zeros(2)


def two_dirac_family(y0, y1, weights: Sequence[Tuple[float, float]], b0: float = 0.0,
                     b1: float = 0.0) -> Tuple[GeodesicCurve, PotentialField]:
    """Geodesics between two Diracs at the critical distance ``pi/2`` (``alpha=1, beta=4``).

    Each ``(r, w)`` in ``weights`` contributes the record ``([y0, r], [y1, 1], w)``;
    ``b0`` is annihilated at ``y0`` and ``b1`` created at ``y1``.  The endpoint
    masses are ``a0 = b0 + sum w r^2`` and ``a1 = b1 + sum w``, and all members
    share the potential ``xi = (sin(t)^2 - s) / (2 s (1-s))`` in the coordinate
    ``t`` along the segment.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    d = y1 - y0
    L = float(np.linalg.norm(d))
    if abs(L - math.pi / 2) > 1e-9:
        raise ValueError(f"|y1 - y0| must equal pi/2, got {L!r}")
    if b0 < 0 or b1 < 0:
        raise ValueError("b0 and b1 must be >= 0")
    w = np.array([[r, wt] for r, wt in weights], dtype=float).reshape(-1, 2)
    if np.any(w[:, 0] <= 0) or np.any(w[:, 1] < 0):
        raise ValueError("weights need r > 0 and w >= 0")
    dim = y0.size
    k = w.shape[0]
    curve = GeodesicCurve(
        np.tile(y0, (k, 1)), w[:, 0], np.tile(y1, (k, 1)), np.ones(k), w[:, 1],
        DiscreteMeasure(y0[None, :], [b0], dim=dim),
        DiscreteMeasure(y1[None, :], [b1], dim=dim),
        Params(),
    )
    e = d / L

    def xi(s, x):
        t = (x - y0) @ e
        return (np.sin(t) ** 2 - s) / (2 * s * (1 - s))

    def grad(s, x):
        t = (x - y0) @ e
        return (np.sin(2 * t) / (2 * s * (1 - s)))[:, None] * e

    return curve, PotentialField(xi, grad)


def hamilton_jacobi_residual(fld: PotentialField, s_values: Sequence[float], x_points,
                             h: float = 1e-3, p: Params = Params()) -> float:
    """Max of ``|d_s xi + (alpha/2)|grad xi|^2 + (beta/2) xi^2|`` by centered differences.

    All derivatives are taken by centered differences of ``fld.xi`` with step ``h``.
    """
    x = np.atleast_2d(np.asarray(x_points, dtype=float))
    d = x.shape[1]
    worst = 0.0
    for s in s_values:
        dxi_ds = (fld.xi(s + h, x) - fld.xi(s - h, x)) / (2 * h)
        grad_sq = np.zeros(len(x))
        for k in range(d):
            step = np.zeros(d)
            step[k] = h
            grad_sq += ((fld.xi(s, x + step) - fld.xi(s, x - step)) / (2 * h)) ** 2
        res = dxi_ds + 0.5 * p.alpha * grad_sq + 0.5 * p.beta * fld.xi(s, x) ** 2
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


TestFunction = Tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]


def monomial_tests(dim: int) -> List[TestFunction]:
    """``1`` and ``x_k``, ``x_k^2`` for every coordinate, with their gradients."""
    tests: List[TestFunction] = [(lambda x: np.ones(len(x)), lambda x: np.zeros_like(x))]
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = 1.0
        tests.append((lambda x, k=k: x[:, k], lambda x, e=e: np.tile(e, (len(x), 1))))
        tests.append((lambda x, k=k: x[:, k] ** 2, lambda x, k=k, e=e: 2 * x[:, k:k + 1] * e))
    return tests


def continuity_residual(curve: GeodesicCurve, fld: PotentialField, s_values: Sequence[float],
                        ds: float = 1e-4, tests: Optional[Sequence[TestFunction]] = None) -> float:
    """Weak form ``d/ds int psi dmu = int (beta xi psi + alpha grad xi . grad psi) dmu``.

    Returns the largest deviation between a centered difference of the left
    side and the right side over the test functions and ``s_values``.
    """
    p = curve.params
    tests = monomial_tests(curve.dim) if tests is None else tests
    worst = 0.0
    for s in s_values:
        mu_m, mu, mu_p = curve.eval(s - ds), curve.eval(s), curve.eval(s + ds)
        x = mu.positions
        xi, grad = fld.sample(s, x)
        for psi, dpsi in tests:
            lhs = (np.sum(psi(mu_p.positions) * mu_p.masses) - np.sum(psi(mu_m.positions) * mu_m.masses)) / (2 * ds)
            rhs = np.sum((p.beta * xi * psi(x) + p.alpha * np.sum(grad * dpsi(x), axis=1)) * mu.masses)
            worst = max(worst, abs(float(lhs - rhs)))
    return worst


def frame_rows(curve: GeodesicCurve, s_values: Sequence[float]) -> List[Tuple[float, ...]]:
    """Rows ``(s, x_1, ..., x_d, mass)``, one per atom per frame."""
    rows = []
    for s in s_values:
        mu = curve.eval(float(s))
        for x, m in zip(mu.positions, mu.masses):
            rows.append((float(s), *map(float, x), float(m)))
    return rows
