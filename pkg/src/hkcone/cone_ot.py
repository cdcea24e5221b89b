"""Exact optimal transport on the cone and the lift-based HK cross-check."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .cone import Params, cone_cost
from .et_solver import EtReport
from .measure import ConeMeasure, ConePlan, DiscreteMeasure
from .tolerances import SOLVER_TOL

__all__ = [
    "ConeOtResult",
    "ValueMismatch",
    "exact_transport",
    "assignment_bruteforce",
    "wasserstein_sq",
    "wasserstein_cone",
    "reservoir_kappa",
    "reservoir_distance",
    "check_no_long_transport",
    "hk_via_lifts",
]

#: relative mismatch of total weights still treated as balanced
BALANCE_TOL = 1e-12


class ValueMismatch(RuntimeError):
    """The lifted plan cost disagrees with the entropy-transport value."""


@dataclass(frozen=True)
class ConeOtResult:
    value: float
    plan: ConePlan
    balanced: bool


def exact_transport(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> Tuple[float, np.ndarray]:
    """Balanced discrete OT ``min <C, P>`` over couplings of ``a`` and ``b``.

    Solved as a linear program with the HiGHS dual simplex, which returns a
    vertex of the transport polytope.  ``b`` is rescaled to the mass of
    ``a`` to absorb rounding differences.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = C.shape
    if n == 0 or m == 0:
        return 0.0, np.zeros((n, m))
    b = b * (a.sum() / b.sum())
    if n == 1 or m == 1:
        # the coupling is unique
        P = b[None, :].copy() if n == 1 else a[:, None].copy()
        return float(np.sum(C * P)), P
    rows = sp.kron(sp.eye(n), np.ones((1, m)))
    cols = sp.kron(np.ones((1, n)), sp.eye(m))
    A = sp.vstack([rows, cols]).tocsr()
    res = linprog(
        C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    P = np.maximum(res.x.reshape(n, m), 0.0)
    return float(np.sum(C * P)), P


def assignment_bruteforce(C: np.ndarray) -> float:
    """Optimal assignment cost by enumerating permutations (square ``C``, at most 8x8)."""
    n = C.shape[0]
    if C.shape != (n, n) or n > 8:
        raise ValueError("need a square cost matrix with n <= 8")
    if n == 0:
        return 0.0
    idx = np.arange(n)
    return float(min(C[idx, list(perm)].sum() for perm in itertools.permutations(range(n))))


def wasserstein_sq(mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> float:
    """Squared quadratic Wasserstein cost between equal-mass measures (raw masses)."""
    if not math.isclose(mu0.total_mass, mu1.total_mass, rel_tol=BALANCE_TOL, abs_tol=0.0):
        return math.inf
    diff = mu0.positions[:, None, :] - mu1.positions[None, :, :]
    return exact_transport(mu0.masses, mu1.masses, np.sum(diff * diff, axis=-1))[0]


def _atoms(lam: ConeMeasure):
    x = lam.positions
    r = lam.radii
    w = lam.weights
    if lam.tip > 0:
        x = np.vstack([x, np.full((1, lam.dim), np.nan)])
        r = np.append(r, 0.0)
        w = np.append(w, lam.tip)
    return x, r, w


def wasserstein_cone(lam0: ConeMeasure, lam1: ConeMeasure, p: Params = Params()) -> ConeOtResult:
    """Quadratic transport cost on the cone; ``inf`` unless the total weights agree."""
    p.require_positive()
    w0, w1 = lam0.total_weight, lam1.total_weight
    empty = ConePlan(np.zeros((0, lam0.dim)), [], np.zeros((0, lam0.dim)), [], [], dim=lam0.dim)
    if abs(w0 - w1) > BALANCE_TOL * max(w0, w1):
        return ConeOtResult(math.inf, empty, False)
    if w0 == 0.0:
        return ConeOtResult(0.0, empty, True)
    x0, r0, a = _atoms(lam0)
    x1, r1, b = _atoms(lam1)
    tip_pair = (r0[:, None] == 0) | (r1[None, :] == 0)
    diff = np.where(tip_pair[..., None], 0.0, x0[:, None, :] - x1[None, :, :])
    L_sq = np.sum(diff * diff, axis=-1)
    C = cone_cost(L_sq, r0[:, None], r1[None, :], p)
    _, P = exact_transport(a, b, C)
    i, j = np.nonzero(P > 0)
    plan = ConePlan(np.nan_to_num(x0[i]), r0[i], np.nan_to_num(x1[j]), r1[j], P[i, j], dim=lam0.dim)
    return ConeOtResult(plan.cost(p), plan, True)


def reservoir_kappa(lam0: ConeMeasure, lam1: ConeMeasure) -> float:
    """Smallest tip padding after which the cone transport cost stops decreasing."""
    theta0, theta1 = lam0.nontip_weight, lam1.nontip_weight
    return max(0.0, theta1 - lam0.tip, theta0 - lam1.tip)


def reservoir_distance(lam0: ConeMeasure, lam1: ConeMeasure, p: Params = Params(),
                       extra: float = 0.0) -> ConeOtResult:
    """Cone transport cost with ``reservoir_kappa + extra`` added at the tip of both measures."""
    if extra < 0:
        raise ValueError("extra padding must be >= 0")
    kappa = reservoir_kappa(lam0, lam1) + extra
    return wasserstein_cone(lam0.with_tip(kappa), lam1.with_tip(kappa), p)


def check_no_long_transport(plan: ConePlan, p: Params = Params(), slack: float = 0.0) -> float:
    """Mass moved between non-tip points over scaled length ``> pi/2 + slack``."""
    ell = p.scale * plan.lengths()
    long = (plan.r0 > 0) & (plan.r1 > 0) & (ell > math.pi / 2 + slack)
    return float(plan.g[long].sum())


def hk_via_lifts(mu0: DiscreteMeasure, mu1: DiscreteMeasure, report: EtReport,
                 p: Params = Params(), tol: float = SOLVER_TOL) -> Tuple[float, ConePlan]:
    """Cone plan built from an optimal calibration and its transport cost.

    Each pair with ``eta_ij > 0`` links ``[x0_i, sqrt(mu0_i/eta0_i)]`` to
    ``[x1_j, sqrt(mu1_j/eta1_j)]`` with mass ``eta_ij``; atoms with zero
    marginal are sent to (or created from) the tip at radius 1.

    Raises
    ------
    ValueMismatch
        If the plan cost differs from ``report.value`` by more than ``2 tol``.
    """
    eta = report.eta.eta
    if eta.shape != (mu0.n, mu1.n):
        raise ValueError("report does not match the measures")
    dim = mu0.dim
    e0, e1 = eta.sum(axis=1), eta.sum(axis=0)
    i, j = np.nonzero(eta > 0)
    r0 = np.sqrt(mu0.masses[i] / e0[i])
    r1 = np.sqrt(mu1.masses[j] / e1[j])
    pure0 = np.nonzero(e0 == 0)[0]
    pure1 = np.nonzero(e1 == 0)[0]
    nan0 = np.full((pure1.size, dim), np.nan)
    nan1 = np.full((pure0.size, dim), np.nan)
    plan = ConePlan(
        np.nan_to_num(np.vstack([mu0.positions[i], mu0.positions[pure0], nan0])),
        np.concatenate([r0, np.ones(pure0.size), np.zeros(pure1.size)]),
        np.nan_to_num(np.vstack([mu1.positions[j], nan1, mu1.positions[pure1]])),
        np.concatenate([r1, np.zeros(pure0.size), np.ones(pure1.size)]),
        np.concatenate([eta[i, j], mu0.masses[pure0], mu1.masses[pure1]]),
        dim=dim,
    )
    value = plan.cost(p)
    if abs(value - report.value) > 2 * tol:
        raise ValueMismatch(f"lift cost {value!r} differs from ET value {report.value!r}")
    return value, plan
