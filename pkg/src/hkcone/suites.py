"""Seeded invariant suites behind ``hkcone verify``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .analysis import (hellinger_limit_check, semiconcavity_phi, semiconcavity_witness,
                       wasserstein_limit_check)
from .charfn import char_function_geodesic
from .cone import ConePoint, Params, cone_dist, cone_geodesic
from .cone_ot import check_no_long_transport, hk_via_lifts, reservoir_distance
from .et_solver import SolverConfig, hk_distance, solve_et
from .geodesic import geodesic_from_plan, mass_profile
from .measure import ConeMeasure, DiscreteMeasure

__all__ = ["Check", "SUITES", "balanced_cone_pair", "random_measure", "run_suite"]


@dataclass(frozen=True)
class Check:
    name: str
    worst: float
    limit: float

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.limit)


#: fixed K that the witness must exceed at b = 1e6
SEMICONCAVITY_K = 50.0


def _worst(values) -> float:
    # np.max propagates NaN, so a broken residual fails its check
    return float(np.max(np.asarray(values, dtype=float), initial=0.0))


def random_measure(rng: np.random.Generator, n_max: int = 4, dim: int = 2, spread: float = 2.0,
                   n_min: int = 1) -> DiscreteMeasure:
    n = int(rng.integers(n_min, n_max + 1))
    return DiscreteMeasure(rng.uniform(0.0, spread, (n, dim)), rng.uniform(0.1, 2.0, n))


def metric_suite(rng, cfg: SolverConfig) -> List[Check]:
    sym, tri = [], []
    for _ in range(200):
        a, b, c = (random_measure(rng) for _ in range(3))
        ab = hk_distance(a, b, Params(), cfg)[0]
        sym.append(abs(ab - hk_distance(b, a, Params(), cfg)[0]))
        bc = hk_distance(b, c, Params(), cfg)[0]
        ac = hk_distance(a, c, Params(), cfg)[0]
        tri.extend([ac - ab - bc, ab - ac - bc, bc - ab - ac])
    return [Check("symmetry", _worst(sym), 1e-6), Check("triangle", _worst(tri), 2e-6)]


def mass_suite(rng, cfg: SolverConfig) -> List[Check]:
    ident, bound = [], []
    for _ in range(20):
        mu0, mu1 = random_measure(rng, 5), random_measure(rng, 5)
        report = solve_et(mu0, mu1, Params(), cfg)
        _, plan = hk_via_lifts(mu0, mu1, report, Params(), cfg.tol)
        prof = mass_profile(geodesic_from_plan(plan))
        ident.append(prof.identity_dev)
        bound.append(prof.bound_violation)
    return [Check("mass identity", _worst(ident), 1e-10), Check("mass bounds", _worst(bound), 1e-12)]


def cone_suite(rng, cfg: SolverConfig) -> List[Check]:
    speed, tri = [], []
    p = Params()
    for _ in range(200):
        z = [ConePoint(rng.uniform(-2, 2, 2), rng.uniform(0.0, 2.0)) for _ in range(3)]
        d01, d12, d02 = cone_dist(z[0], z[1], p), cone_dist(z[1], z[2], p), cone_dist(z[0], z[2], p)
        tri.append(d02 - d01 - d12)
        s, t = sorted(rng.uniform(0, 1, 2))
        zs, zt = cone_geodesic(s, z[0], z[1], p).z, cone_geodesic(t, z[0], z[1], p).z
        speed.append(abs(cone_dist(zs, zt, p) - (t - s) * d01))
    return [Check("cone triangle", _worst(tri), 1e-12), Check("cone constant speed", _worst(speed), 1e-10)]


def limits_suite(rng, cfg: SolverConfig) -> List[Check]:
    w = wasserstein_limit_check(DiscreteMeasure([[0.0]], [1.0]), DiscreteMeasure([[0.1]], [1.0]),
                                [1.0, 0.1, 0.01, 0.001], cfg=cfg)
    final_h = []
    for _ in range(5):
        mu0, mu1 = random_measure(rng, 3, n_min=3), random_measure(rng, 3, n_min=3)
        final_h.append(hellinger_limit_check(mu0, mu1, [1.0, 1e-2, 1e-4, 1e-6], cfg=cfg).deviations[-1])
    return [
        Check("wasserstein limit monotone", 0.0 if w.monotone else 1.0, 0.0),
        Check("wasserstein limit final", w.deviations[-1], 1e-2),
        Check("hellinger limit final", _worst(final_h), 1e-3),
    ]


def balanced_cone_pair(rng: np.random.Generator, n0: int = 3, n1: int = 4, dim: int = 2):
    """Random cone measures of equal total weight, with tip weight on the first."""
    tip = float(rng.uniform(0.0, 1.0))
    lam0 = ConeMeasure(rng.uniform(0, 3, (n0, dim)), rng.uniform(0.2, 2, n0), rng.uniform(0.1, 2, n0), tip)
    w1 = rng.uniform(0.1, 2, n1)
    w1 *= lam0.total_weight / w1.sum()
    lam1 = ConeMeasure(rng.uniform(0, 3, (n1, dim)), rng.uniform(0.2, 2, n1), w1)
    return lam0, lam1


def reservoir_suite(rng, cfg: SolverConfig) -> List[Check]:
    long, pad = [], []
    for _ in range(20):
        lam0, lam1 = balanced_cone_pair(rng)
        res = reservoir_distance(lam0, lam1)
        long.append(check_no_long_transport(res.plan, slack=1e-9))
        pad.append(abs(reservoir_distance(lam0, lam1, extra=1.0).value - res.value))
    return [Check("no long transport", _worst(long), 1e-12), Check("padding beyond kappa*", _worst(pad), 1e-10)]


def charfn_suite(rng, cfg: SolverConfig) -> List[Check]:
    g = char_function_geodesic()
    viol, _ = g.optimality_gap(200)
    m0, m1 = g.marginal_masses()
    return [
        Check("w_* vs 0.4895", abs(g.w_star - 0.4895), 1e-3),
        Check("c_* vs 1.0634", abs(g.c_star - 1.0634), 1e-3),
        Check("shooting vs elliptic c", abs(g.c_star - g.c_elliptic), 1e-8),
        Check("boundary mismatch", g.boundary_mismatch, 1e-10),
        Check("h-optim violation", viol, 1e-6),
        Check("marginal masses", abs(m0 - m1), 1e-8),
    ]


def semiconcavity_suite(rng, cfg: SolverConfig) -> List[Check]:
    nonpositive = sum(semiconcavity_phi(y) <= 0 for y in (0.1, 0.5, 1.0, 1.3))
    agree = []
    for b in (0.5, 2.0, 10.0, 100.0):
        for y in (0.1, 0.5, 1.0):
            wit = semiconcavity_witness(b, y, cfg)
            agree.append(abs(wit.k_lower - wit.solver_k))
    big = semiconcavity_witness(1e6, 0.5, solve=False).k_lower
    return [
        Check("phi <= 0 on the y grid (count)", float(nonpositive), 0.0),
        Check("closed form vs solver", _worst(agree), 5e-6),
        Check(f"K shortfall below {SEMICONCAVITY_K:g} at b=1e6", _worst([SEMICONCAVITY_K - big]), 0.0),
    ]


SUITES: Dict[str, Callable] = {
    "metric": metric_suite,
    "mass": mass_suite,
    "cone": cone_suite,
    "limits": limits_suite,
    "reservoir": reservoir_suite,
    "charfn": charfn_suite,
    "semiconcavity": semiconcavity_suite,
}


def run_suite(name: str, seed: int = 0, cfg: SolverConfig = SolverConfig()) -> List[Check]:
    if name == "all":
        out: List[Check] = []
        for key in SUITES:
            out.extend(run_suite(key, seed, cfg))
        return out
    if name not in SUITES:
        raise KeyError(name)
    checks = SUITES[name](np.random.default_rng(seed), cfg)
    return [Check(f"{name}: {c.name}", c.worst, c.limit) for c in checks]
