"""Logarithmic entropy-transport problem and the HK distance.

For ``lam = 4/beta`` the functional on couplings ``eta >= 0`` is

.. math::

    ET(\\eta) = \\lambda \\Big[\\sum_i \\mu_{0,i} F(\\varrho_{0,i})
              + \\sum_j \\mu_{1,j} F(\\varrho_{1,j})\\Big]
              + \\sum_{ij} c_{ij} \\eta_{ij},
    \\qquad F(z) = z \\log z - z + 1,

where ``rho0 = eta0 / mu0`` and ``rho1 = eta1 / mu1`` are the marginal
densities and ``c = -(8/beta) log cos(l)`` for scaled lengths ``l < pi/2``
(``+inf`` otherwise).  Its minimum is ``HK^2``.

Two solvers are combined.  An entropic scaling iteration with annealed
regularization produces a strictly positive warm start; a projected
Newton iteration on the free entries (gradient projection on the bounds,
Armijo backtracking) then removes the regularization bias and drives the
optimality residuals to rounding level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterator, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from .cone import Params
from .measure import DiscreteMeasure
from .tolerances import LOG_FLOOR, SOLVER_TOL

STAGE_TOL = 1e-6
# Newton iterations tried after an intermediate annealing stage
STAGE_NEWTON_BUDGET = 100
# residual at which annealing stops early
EARLY_STOP = 1e-12

__all__ = [
    "SolverConfig",
    "CostMatrix",
    "CalibrationMatrix",
    "KKTResiduals",
    "EtReport",
    "NonConvergence",
    "build_cost",
    "et_value",
    "kkt_check",
    "solve_et",
    "hk_distance",
    "brute_force_et",
]


@dataclass(frozen=True)
class SolverConfig:
    tol: float = SOLVER_TOL
    eps_schedule: Tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4)
    max_iter_scaling: int = 10_000
    max_iter_gradient: int = 50_000

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        object.__setattr__(self, "eps_schedule", tuple(float(e) for e in self.eps_schedule))
        if any(not e > 0 for e in self.eps_schedule):
            raise ValueError("eps_schedule entries must be > 0")
        if self.max_iter_scaling < 0 or self.max_iter_gradient < 1:
            raise ValueError("iteration caps must be positive")

    def to_json(self) -> dict:
        return {
            "tol": self.tol,
            "eps_schedule": list(self.eps_schedule),
            "max_iter_scaling": self.max_iter_scaling,
            "max_iter_gradient": self.max_iter_gradient,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SolverConfig":
        known = {"tol", "eps_schedule", "max_iter_scaling", "max_iter_gradient"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "SolverConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class CostMatrix:
    c: np.ndarray
    k: np.ndarray
    ell: np.ndarray

    @property
    def finite(self) -> np.ndarray:
        return self.k > 0


@dataclass(frozen=True)
class CalibrationMatrix:
    """Coupling ``eta`` with its marginals and marginal densities."""

    eta: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray

    @property
    def eta0(self) -> np.ndarray:
        return self.eta.sum(axis=1)

    @property
    def eta1(self) -> np.ndarray:
        return self.eta.sum(axis=0)

    @property
    def rho0(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.mu0 > 0, self.eta0 / self.mu0, np.nan)

    @property
    def rho1(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.mu1 > 0, self.eta1 / self.mu1, np.nan)

    @property
    def mass(self) -> float:
        return float(self.eta.sum())


@dataclass(frozen=True)
class KKTResiduals:
    """Violations of the three optimality conditions.

    ``support_length``: largest ``eta_ij`` on a pair with ``l_ij >= pi/2``.
    ``inequality``: largest ``(cos^2 l_ij - rho0_i rho1_j)_+``; at an optimum the
    product of the densities dominates the kernel wherever ``eta_ij = 0``.
    ``complementarity``: largest ``|rho0_i rho1_j - cos^2 l_ij|`` where ``eta_ij > 0``.
    ``undefined_pairs``: number of pairs skipped because a density is undefined.
    """

    support_length: float
    inequality: float
    complementarity: float
    undefined_pairs: int = 0

    @property
    def worst(self) -> float:
        return max(self.support_length, self.inequality, self.complementarity)

    def to_json(self) -> dict:
        return {
            "support_length": self.support_length,
            "inequality": self.inequality,
            "complementarity": self.complementarity,
            "undefined_pairs": self.undefined_pairs,
        }


@dataclass(frozen=True)
class EtReport:
    value: float
    eta: CalibrationMatrix
    kkt: KKTResiduals
    iterations: int
    solver: str
    mass_identity_gap: float = float("nan")


class NonConvergence(RuntimeError):
    """Iteration cap reached above tolerance; ``report`` holds the best iterate."""

    def __init__(self, message: str, report: EtReport):
        super().__init__(message)
        self.report = report


def build_cost(mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: Params) -> CostMatrix:
    """Transport cost ``-(8/beta) log cos(l)`` and kernel ``K = cos(l)^2`` on ``l < pi/2``."""
    p.require_positive()
    if mu0.dim != mu1.dim:
        raise ValueError("dimension mismatch")
    diff = mu0.positions[:, None, :] - mu1.positions[None, :, :]
    ell = p.scale * np.sqrt(np.sum(diff * diff, axis=-1))
    inside = ell < math.pi / 2
    cos_l = np.where(inside, np.cos(np.where(inside, ell, 0.0)), 0.0)
    inside &= cos_l > 0
    k = np.where(inside, cos_l * cos_l, 0.0)
    with np.errstate(divide="ignore"):
        c = np.where(inside, -(8.0 / p.beta) * np.log(np.where(inside, cos_l, 1.0)), np.inf)
    return CostMatrix(c=c, k=k, ell=ell)


def _entropy_part(t: np.ndarray, m: np.ndarray) -> np.ndarray:
    """``m F(t/m) = t log(t/m) - t + m`` with ``0 log 0 = 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0) / m) - t + m, m)
    return out


def et_value(eta: CalibrationMatrix, mu0: DiscreteMeasure, mu1: DiscreteMeasure,
             cost: CostMatrix, p: Params) -> float:
    e = eta.eta
    if np.any(e[~cost.finite] > 0):
        return math.inf
    transport = float(np.sum(np.where(cost.finite, cost.c, 0.0) * e))
    ent = float(np.sum(_entropy_part(e.sum(axis=1), mu0.masses)))
    ent += float(np.sum(_entropy_part(e.sum(axis=0), mu1.masses)))
    return p.lam * ent + transport


def kkt_check(report: EtReport, cost: CostMatrix, mu0: DiscreteMeasure,
              mu1: DiscreteMeasure) -> KKTResiduals:
    return _kkt(report.eta.eta, cost, mu0.masses, mu1.masses)


def _kkt(eta: np.ndarray, cost: CostMatrix, m0: np.ndarray, m1: np.ndarray) -> KKTResiduals:
    if eta.size == 0:
        return KKTResiduals(0.0, 0.0, 0.0, 0)
    long = ~cost.finite
    support = float(eta[long].max()) if np.any(long) else 0.0
    defined0, defined1 = m0 > 0, m1 > 0
    rho0 = np.where(defined0, eta.sum(axis=1) / np.where(defined0, m0, 1.0), 0.0)
    rho1 = np.where(defined1, eta.sum(axis=0) / np.where(defined1, m1, 1.0), 0.0)
    gap = rho0[:, None] * rho1[None, :] - cost.k
    ok = defined0[:, None] & defined1[None, :]
    ineq = float(np.max(np.maximum(-gap[ok], 0.0), initial=0.0))
    pos = ok & (eta > 0)
    comp = float(np.max(np.abs(gap[pos]), initial=0.0))
    return KKTResiduals(support, ineq, comp, int(np.sum(~ok)))


# -- Solver A: annealed entropic scaling ---------------------------------------

def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    top = np.max(a, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    out = np.log(np.sum(np.exp(a - top), axis=axis)) + np.squeeze(top, axis=axis)
    return out


def _components(finite: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    """Connected components of the bipartite graph of finite entries."""
    n, m = finite.shape
    adj = np.zeros((n + m, n + m), dtype=bool)
    adj[:n, n:] = finite
    count, labels = connected_components(adj, directed=False)
    return labels[:n], labels[n:], count


def _scaling(c: np.ndarray, m0: np.ndarray, m1: np.ndarray, lam: float,
             cfg: SolverConfig) -> Iterator[Tuple[np.ndarray, int]]:
    """Entropic unbalanced scaling in log domain.

    A generator: after every stage of the schedule it yields the current
    (strictly positive on finite entries) coupling and the sweep count.

    Each sweep updates the dual potentials of both marginals with the
    damping exponent ``lam/(lam+eps)`` and then, on every connected
    component of the support graph, applies the optimal opposite shift of
    the two potentials.  The shift leaves the coupling term unchanged and
    removes the slow mass mode of the plain iteration.
    """
    finite = np.isfinite(c)
    cbar = float(c[finite].max()) if np.any(finite) else 1.0
    if cbar <= 0:
        cbar = 1.0
    lab0, lab1, ncomp = _components(finite)
    log_m0, log_m1 = np.log(m0), np.log(m1)
    f = np.zeros(m0.shape[0])
    g = np.zeros(m1.shape[0])
    iters = 0
    eps = cbar
    cz = np.where(finite, c, 0.0)
    for rel in cfg.eps_schedule:
        eps = rel * cbar
        kappa = lam / (lam + eps)
        neg = np.where(finite, -cz / eps, -np.inf)
        step_tol = STAGE_TOL * eps
        for _ in range(cfg.max_iter_scaling):
            iters += 1
            f_new = -kappa * eps * _logsumexp(neg + (log_m1 + g / eps)[None, :], axis=1)
            g_new = -kappa * eps * _logsumexp(neg + (log_m0 + f_new / eps)[:, None], axis=0)
            a = np.bincount(lab0, weights=m0 * np.exp(-f_new / lam), minlength=ncomp)
            b = np.bincount(lab1, weights=m1 * np.exp(-g_new / lam), minlength=ncomp)
            tau = 0.5 * lam * np.log(a / b)
            f_new += tau[lab0]
            g_new -= tau[lab1]
            delta = max(np.max(np.abs(f_new - f)), np.max(np.abs(g_new - g)))
            f, g = f_new, g_new
            if delta < step_tol:
                break
        log_eta = log_m0[:, None] + log_m1[None, :] + (f[:, None] + g[None, :] - cz) / eps
        yield np.where(finite, np.exp(np.minimum(log_eta, 700.0)), 0.0), iters


# -- Solver B: projected Newton refinement --------------------------------------

class _Problem:
    """ET restricted to the finite entries, as a function of a flat vector."""

    def __init__(self, c: np.ndarray, m0: np.ndarray, m1: np.ndarray, lam: float):
        self.rows, self.cols = np.nonzero(np.isfinite(c))
        self.c = c[self.rows, self.cols]
        self.m0, self.m1, self.lam = m0, m1, lam
        self.shape = c.shape

    def marginals(self, e: np.ndarray):
        e0 = np.bincount(self.rows, weights=e, minlength=self.shape[0])
        e1 = np.bincount(self.cols, weights=e, minlength=self.shape[1])
        return e0, e1

    def value(self, e: np.ndarray) -> float:
        e0, e1 = self.marginals(e)
        return self.lam * float(np.sum(_entropy_part(e0, self.m0)) + np.sum(_entropy_part(e1, self.m1))) + float(self.c @ e)

    def gradient(self, e: np.ndarray) -> np.ndarray:
        e0, e1 = self.marginals(e)
        l0 = np.log(np.maximum(e0 / self.m0, LOG_FLOOR))
        l1 = np.log(np.maximum(e1 / self.m1, LOG_FLOOR))
        return self.lam * (l0[self.rows] + l1[self.cols]) + self.c

    def hessian(self, e: np.ndarray, idx: np.ndarray) -> np.ndarray:
        e0, e1 = self.marginals(e)
        w0 = self.lam / np.maximum(e0, LOG_FLOOR)
        w1 = self.lam / np.maximum(e1, LOG_FLOOR)
        r, c = self.rows[idx], self.cols[idx]
        H = np.where(r[:, None] == r[None, :], w0[r][:, None], 0.0)
        H += np.where(c[:, None] == c[None, :], w1[c][:, None], 0.0)
        return H

    def dense(self, e: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = e
        return out


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Symmetric scaling then a tiny ridge: the Hessian is singular along
    # cycles of the support graph, where the line search and the bound
    # projection decide.
    dscale = 1.0 / np.sqrt(np.diag(H))
    Hs = H * dscale[:, None] * dscale[None, :]
    ridge = 1e-12 * max(1.0, float(np.max(np.diag(Hs))))
    try:
        y = np.linalg.solve(Hs + ridge * np.eye(H.shape[0]), -g * dscale)
    except np.linalg.LinAlgError:
        y = np.linalg.lstsq(Hs, -g * dscale, rcond=None)[0]
    return y * dscale


def _refine(prob: _Problem, e: np.ndarray, cfg: SolverConfig, residual) -> Tuple[np.ndarray, int, float]:
    """Projected Newton on ``e >= 0``; returns the best iterate, iterations and its residual."""
    sigma = 1e-4
    best_e, best_r = e.copy(), residual(e)
    target = min(cfg.tol, 1e-13)
    stall = 0
    it = 0
    for it in range(1, cfg.max_iter_gradient + 1):
        if best_r <= target:
            break
        g = prob.gradient(e)
        f0 = prob.value(e)
        proj_gap = e - np.maximum(e - g, 0.0)
        eps_act = min(1e-3 * max(float(e.max()), 1e-300), float(np.max(np.abs(proj_gap))))
        active = (e <= eps_act) & (g > 0)
        free = ~active
        d = np.zeros_like(e)
        d[active] = -e[active]
        if np.any(free):
            idx = np.nonzero(free)[0]
            d[idx] = _newton_direction(prob.hessian(e, idx), g[idx])
        slack = 8 * np.finfo(float).eps * max(abs(f0), 1.0)
        t, accepted = 1.0, False
        for _ in range(60):
            trial = np.maximum(e + t * d, 0.0)
            if prob.value(trial) <= f0 + sigma * float(g @ (trial - e)) + slack:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # fall back to a scaled projected-gradient step
            d = -e * g / prob.lam
            t = 1.0
            for _ in range(60):
                trial = np.maximum(e + t * d, 0.0)
                if prob.value(trial) <= f0 + sigma * float(g @ (trial - e)) + slack:
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            break
        e = trial
        r = residual(e)
        if r < best_r:
            best_e, best_r = e.copy(), r
            stall = 0
        else:
            stall += 1
            if stall >= 25 and best_r <= cfg.tol:
                break
    return best_e, it, best_r


def solve_et(mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: Params = Params(),
             cfg: SolverConfig = SolverConfig()) -> EtReport:
    """Minimize the entropy-transport functional.

    Raises
    ------
    NonConvergence
        If the optimality residuals stay above ``cfg.tol``.
    """
    cost = build_cost(mu0, mu1, p)
    m0, m1 = mu0.masses, mu1.masses
    eta = np.zeros((mu0.n, mu1.n))
    rows = np.any(cost.finite, axis=1)
    cols = np.any(cost.finite, axis=0)
    iters = 0
    solver = "scaling"
    if np.any(rows):
        sub_c = cost.c[np.ix_(rows, cols)]
        sub_m0, sub_m1 = m0[rows], m1[cols]
        prob = _Problem(sub_c, sub_m0, sub_m1, p.lam)
        sub_cost = CostMatrix(sub_c, cost.k[np.ix_(rows, cols)], cost.ell[np.ix_(rows, cols)])

        def residual(e):
            return _kkt(prob.dense(e), sub_cost, sub_m0, sub_m1).worst

        # Refine after every annealing stage and stop as soon as the
        # refinement lands on the optimum; later stages only matter when
        # the warm start is too far off for the Newton iteration.
        best_e, best_r, newton_iters = None, math.inf, 0
        n_stages = len(cfg.eps_schedule)
        for k, (start, sweeps) in enumerate(_scaling(sub_c, sub_m0, sub_m1, p.lam, cfg)):
            last = k == n_stages - 1
            budget = cfg.max_iter_gradient if last else min(STAGE_NEWTON_BUDGET, cfg.max_iter_gradient)
            e, it_b, r = _refine(prob, start[prob.rows, prob.cols], replace(cfg, max_iter_gradient=budget), residual)
            newton_iters += it_b
            iters = sweeps
            if r < best_r:
                best_e, best_r = e, r
            if best_r <= EARLY_STOP:
                break
        iters += newton_iters
        solver = "gradient"
        eta[np.ix_(rows, cols)] = prob.dense(best_e)
    cal = CalibrationMatrix(eta, m0, m1)
    kkt = _kkt(eta, cost, m0, m1)
    report = EtReport(
        value=et_value(cal, mu0, mu1, cost, p), eta=cal, kkt=kkt, iterations=iters, solver=solver,
    )
    if kkt.worst > cfg.tol:
        raise NonConvergence(f"KKT residual {kkt.worst:.3e} above tol {cfg.tol:.1e}", report)
    return report


def hk_distance(mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: Params = Params(),
                cfg: SolverConfig = SolverConfig()) -> Tuple[float, float, EtReport]:
    """HK distance ``(hk, hk_sq, report)``.

    ``report.mass_identity_gap`` records ``|hk_sq - (4/beta)(|mu0| + |mu1| - 2 |eta|)|``.
    """
    report = solve_et(mu0, mu1, p, cfg)
    hk_sq = max(report.value, 0.0)
    gap = abs(hk_sq - p.lam * (mu0.total_mass + mu1.total_mass - 2.0 * report.eta.mass))
    report = replace(report, mass_identity_gap=gap)
    return math.sqrt(hk_sq), hk_sq, report


def brute_force_et(mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: Params = Params(),
                   grid: float = 1e-3) -> float:
    """Grid-search oracle for the ET minimum on problems with at most four pairs.

    A coarse grid over ``[0, bound]^k`` (``bound = max(|mu0|, |mu1|)``) is
    repeatedly refined around the best point until the cell width is below
    ``grid``; golden-section sweeps over single coordinates finish the job.
    The functional is convex, so the zoom never loses the minimum.
    """
    if mu0.n * mu1.n > 4:
        raise ValueError("brute force supports n*m <= 4")
    cost = build_cost(mu0, mu1, p)
    rows, cols = np.nonzero(cost.finite)
    k = rows.size
    lam = p.lam
    if k == 0:
        return lam * (mu0.total_mass + mu1.total_mass)
    c = cost.c[rows, cols]
    m0, m1 = mu0.masses, mu1.masses
    bound = max(mu0.total_mass, mu1.total_mass)

    def values(E: np.ndarray) -> np.ndarray:
        E = np.atleast_2d(E)
        e0 = np.zeros((E.shape[0], m0.size))
        e1 = np.zeros((E.shape[0], m1.size))
        for q in range(k):
            e0[:, rows[q]] += E[:, q]
            e1[:, cols[q]] += E[:, q]
        ent = _entropy_part(e0, m0[None, :]).sum(axis=1) + _entropy_part(e1, m1[None, :]).sum(axis=1)
        return lam * ent + E @ c

    points = {1: 201, 2: 61, 3: 25, 4: 13}[k]
    lo, hi = np.zeros(k), np.full(k, bound)
    best = np.zeros(k)
    while True:
        axes = [np.linspace(lo[q], hi[q], points) for q in range(k)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
        best = mesh[np.argmin(values(mesh))]
        cell = (hi - lo) / (points - 1)
        if np.all(cell <= grid):
            break
        lo = np.maximum(best - 2 * cell, 0.0)
        hi = np.minimum(best + 2 * cell, bound)
    invphi = (math.sqrt(5) - 1) / 2
    for _ in range(40):
        before = best.copy()
        for q in range(k):
            a, b = max(best[q] - 2 * grid, 0.0), min(best[q] + 2 * grid, bound)
            for _ in range(60):
                x1 = b - invphi * (b - a)
                x2 = a + invphi * (b - a)
                t1, t2 = best.copy(), best.copy()
                t1[q], t2[q] = x1, x2
                v1, v2 = values(np.vstack([t1, t2]))
                if v1 <= v2:
                    b = x2
                else:
                    a = x1
            cand = best.copy()
            cand[q] = 0.5 * (a + b)
            if values(cand)[0] <= values(best)[0]:
                best = cand
        if np.max(np.abs(best - before)) < 1e-12:
            break
    return float(values(best)[0])
