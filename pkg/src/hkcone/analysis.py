"""Limits, convexity checks and the non-semiconcavity witness."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .cone import Params, cos_trunc
from .cone_ot import BALANCE_TOL, wasserstein_sq
from .et_solver import SolverConfig, hk_distance
from .geodesic import GeodesicCurve
from .measure import DiscreteMeasure

__all__ = [
    "LimitReport",
    "SemiconcavityWitness",
    "LogEntropyReport",
    "wasserstein_target",
    "hellinger_target",
    "wasserstein_limit_check",
    "hellinger_limit_check",
    "lambda_convexity_check",
    "log_entropy_identity_check",
    "semiconcavity_phi",
    "semiconcavity_witness",
]


@dataclass(frozen=True)
class LimitReport:
    #: (parameter value, hk value) per step
    sequence: List[Tuple[float, float]]
    target: float
    deviations: List[float]

    @property
    def monotone(self) -> bool:
        """Deviations are nonincreasing along the sequence."""
        return all(b <= a for a, b in zip(self.deviations, self.deviations[1:]))

    def to_json(self) -> dict:
        return {
            "sequence": [list(t) for t in self.sequence],
            "target": self.target,
            "deviations": list(self.deviations),
            "monotone": self.monotone,
        }


def wasserstein_target(mu0: DiscreteMeasure, mu1: DiscreteMeasure, alpha: float = 1.0) -> float:
    """``W(mu0, mu1) / sqrt(alpha)`` for the quadratic cost on the raw (unnormalized) masses."""
    return math.sqrt(wasserstein_sq(mu0, mu1) / alpha)


def wasserstein_limit_check(mu0: DiscreteMeasure, mu1: DiscreteMeasure, betas: Sequence[float],
                            alpha: float = 1.0, cfg: SolverConfig = SolverConfig()) -> LimitReport:
    """``HK_{alpha, beta}`` along decreasing ``beta`` against the transport distance."""
    m0, m1 = mu0.total_mass, mu1.total_mass
    if m0 <= 0 or abs(m0 - m1) > BALANCE_TOL * max(m0, m1):
        raise ValueError("the beta -> 0 limit is finite only for equal positive masses")
    target = wasserstein_target(mu0, mu1, alpha)
    seq = [(float(b), hk_distance(mu0, mu1, Params(alpha, b), cfg)[0]) for b in betas]
    return LimitReport(seq, target, [abs(v - target) for _, v in seq])


def hellinger_target(mu0: DiscreteMeasure, mu1: DiscreteMeasure, beta: float = 4.0) -> float:
    """``sqrt(4/beta) H(mu0, mu1)`` with the discrete Hellinger distance ``H``."""
    index1 = {tuple(x): m for x, m in zip(map(tuple, mu1.positions), mu1.masses)}
    total = 0.0
    seen = set()
    for x, m in zip(map(tuple, mu0.positions), mu0.masses):
        m1 = index1.get(x, 0.0)
        seen.add(x)
        total += (math.sqrt(m) - math.sqrt(m1)) ** 2
    total += sum(m for x, m in index1.items() if x not in seen)
    return math.sqrt(4.0 / beta * total)


def hellinger_limit_check(mu0: DiscreteMeasure, mu1: DiscreteMeasure, alphas: Sequence[float],
                          beta: float = 4.0, cfg: SolverConfig = SolverConfig()) -> LimitReport:
    """``HK_{alpha, beta}`` along decreasing ``alpha`` against the Hellinger distance."""
    target = hellinger_target(mu0, mu1, beta)
    seq = [(float(a), hk_distance(mu0, mu1, Params(a, beta), cfg)[0]) for a in alphas]
    return LimitReport(seq, target, [abs(v - target) for _, v in seq])


def lambda_convexity_check(phi: Callable[[np.ndarray], np.ndarray], curve: GeodesicCurve, lam: float,
                           s_grid: Sequence[float] = tuple(k / 20 for k in range(21)),
                           hk_sq: float = None) -> float:
    """Worst ``F(mu(s)) - [(1-s) F(mu0) + s F(mu1) - lam s(1-s)/2 hk_sq]`` for ``F(mu) = int phi dmu``.

    A nonpositive result means no violation was found.  ``hk_sq`` defaults
    to the curve's plan cost.
    """
    if hk_sq is None:
        hk_sq = curve.cost()

    def F(mu):
        return float(np.sum(phi(mu.positions) * mu.masses))

    f0, f1 = F(curve.eval(0.0)), F(curve.eval(1.0))
    worst = -math.inf
    for s in s_grid:
        s = float(s)
        bound = (1 - s) * f0 + s * f1 - lam * s * (1 - s) / 2 * hk_sq
        worst = max(worst, F(curve.eval(s)) - bound)
    return worst


@dataclass(frozen=True)
class LogEntropyReport:
    #: |e(1) - e1| and |e(0) - omega_vol|
    end1: float
    end0: float
    #: smallest second difference of s -> e(s) over the grid
    min_second_difference: float

    def to_json(self) -> dict:
        return asdict(self)


def _entropy_of_scaled(s: float, e1: float, m1: float, omega_vol: float) -> float:
    s2 = s * s
    xlogx = s2 * math.log(s2) if s2 > 0 else 0.0
    return s2 * e1 + xlogx * m1 + (1.0 - s2) * omega_vol


def log_entropy_identity_check(e1: float, m1: float, omega_vol: float,
                               s_grid: Sequence[float]) -> LogEntropyReport:
    """Entropy along ``s -> s^2 mu1``: ``e(s) = s^2 e1 + s^2 log(s^2) m1 + (1 - s^2) omega_vol``."""
    s = np.asarray(sorted(float(v) for v in s_grid))
    if len(s) < 3:
        raise ValueError("need at least three grid points")
    e = np.array([_entropy_of_scaled(v, e1, m1, omega_vol) for v in s])
    h = np.diff(s)
    d2 = 2 * ((e[2:] - e[1:-1]) / h[1:] - (e[1:-1] - e[:-2]) / h[:-1]) / (h[1:] + h[:-1])
    return LogEntropyReport(
        end1=abs(_entropy_of_scaled(1.0, e1, m1, omega_vol) - e1),
        end0=abs(_entropy_of_scaled(0.0, e1, m1, omega_vol) - omega_vol),
        min_second_difference=float(d2.min()),
    )


@dataclass(frozen=True)
class SemiconcavityWitness:
    b: float
    y: float
    phi: float
    #: 1 + sqrt(b) phi
    k_lower: float
    #: the semiconcavity quotient from solved distances
    solver_k: float

    def to_json(self) -> dict:
        return asdict(self)


def semiconcavity_phi(y: float) -> float:
    """``sqrt(8) cos_{pi/2}(y) - 4 cos_{pi/2}(sqrt(y^2 + pi^2/16))``."""
    return float(math.sqrt(8.0) * cos_trunc(y, math.pi / 2) - 4.0 * cos_trunc(
        math.sqrt(y * y + math.pi ** 2 / 16), math.pi / 2
    ))


def semiconcavity_witness(b: float, y: float, cfg: SolverConfig = SolverConfig(),
                          solve: bool = True) -> SemiconcavityWitness:
    """Semiconcavity quotient for ``delta_0``, ``delta_{(pi/2) e1}`` and ``b delta_z``.

    Here ``z = (pi/4) e1 + y e2`` and the geodesic midpoint is
    ``(1/2) delta_{(pi/4) e1}`` (``alpha = 1, beta = 4``).  The quotient
    ``[hk(mu0, mu*)^2/2 + hk(mu1, mu*)^2/2 - hk(mu(1/2), mu*)^2] / [hk(mu0, mu1)^2/4]``
    equals ``1 + sqrt(b) phi(y)`` and bounds every admissible ``K`` from below.
    Pass ``solve=False`` to skip the solver route (``solver_k`` is then NaN).
    """
    if not (b > 0 and y > 0):
        raise ValueError("need b > 0 and y > 0")
    phi = semiconcavity_phi(y)
    k_lower = 1.0 + math.sqrt(b) * phi
    solver_k = math.nan
    if solve:
        mu0 = DiscreteMeasure.dirac([0.0, 0.0])
        mu1 = DiscreteMeasure.dirac([math.pi / 2, 0.0])
        mid = DiscreteMeasure.dirac([math.pi / 4, 0.0], 0.5)
        star = DiscreteMeasure.dirac([math.pi / 4, y], b)
        d = {name: hk_distance(m, star, Params(), cfg)[1] for name, m in
             (("0", mu0), ("1", mu1), ("mid", mid))}
        d01 = hk_distance(mu0, mu1, Params(), cfg)[1]
        solver_k = (0.5 * d["0"] + 0.5 * d["1"] - d["mid"]) / (0.25 * d01)
    return SemiconcavityWitness(float(b), float(y), phi, k_lower, solver_k)
