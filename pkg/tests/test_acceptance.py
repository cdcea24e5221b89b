"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from hkcone.analysis import (hellinger_limit_check, semiconcavity_phi, semiconcavity_witness,
                             wasserstein_limit_check)
from hkcone.charfn import char_function_geodesic
from hkcone.cone_ot import check_no_long_transport, hk_via_lifts, reservoir_distance
from hkcone.et_solver import brute_force_et, hk_distance, solve_et
from hkcone.fixtures import FIXTURES, mass_split_closed_form, two_dirac_closed_form
from hkcone.geodesic import (continuity_residual, dilation_geodesic, dilation_potential,
                             dirac_line_example, geodesic_from_plan, hamilton_jacobi_residual,
                             mass_profile, two_dirac_family)
from hkcone.measure import DiscreteMeasure
from hkcone.suites import balanced_cone_pair, random_measure


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return emit


def dirac(x, m):
    return DiscreteMeasure([[x]], [m])


def _curve(mu0, mu1):
    rep = solve_et(mu0, mu1)
    _, plan = hk_via_lifts(mu0, mu1, rep)
    return geodesic_from_plan(plan), rep


def test_criterion_01_two_dirac_closed_form(report):
    Ls = [0.0, 0.3, math.pi / 4, 1.2, math.pi / 2, 2.0, 3.0]
    masses = [(1, 1), (1, 4), (0.1, 10)]
    t0 = time.perf_counter()
    worst = max(abs(solve_et(dirac(0.0, a0), dirac(L, a1)).value - two_dirac_closed_form(L, a0, a1))
                for L in Ls for a0, a1 in masses)
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-5 and elapsed < 1.0, f"worst {worst:.2e} (<= 1e-5), {elapsed:.3f} s (< 1 s)")


def test_criterion_02_mass_splitting(report):
    worst = 0.0
    for a0, a1, b1 in [(1, 1, 1), (2, 0.5, 3)]:
        for L in (0.3, 1.0):
            value = solve_et(dirac(0.0, a0), DiscreteMeasure([[0.0], [L]], [a1, b1])).value
            worst = max(worst, abs(value - mass_split_closed_form(a0, a1, b1, L)))
    report(2, worst <= 1e-5, f"worst {worst:.2e} (<= 1e-5)")


def test_criterion_03_oracle_equivalence(report):
    small = {k: f for k, f in FIXTURES.items() if f.mu0.n <= 2 and f.mu1.n <= 2}
    worst = max(abs(brute_force_et(f.mu0, f.mu1, grid=1e-3) - solve_et(f.mu0, f.mu1).value)
                for f in small.values())
    report(3, worst <= 1e-3, f"{len(small)} fixtures, worst {worst:.2e} (<= 1e-3)")


def test_criterion_04_lift_cross_check(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        mu0, mu1 = random_measure(rng, 5), random_measure(rng, 5)
        rep = solve_et(mu0, mu1)
        value, _ = hk_via_lifts(mu0, mu1, rep)
        worst = max(worst, abs(value - rep.value))
    report(4, worst <= 2e-6, f"50 instances, worst {worst:.2e} (<= 2e-6)")


def test_criterion_05_mass_identity(report):
    ident = bound = 0.0
    for f in FIXTURES.values():
        prof = mass_profile(_curve(f.mu0, f.mu1)[0])
        ident = max(ident, prof.identity_dev)
        bound = max(bound, prof.bound_violation)
    ok = ident <= 1e-10 and bound <= 1e-12
    report(5, ok, f"{len(FIXTURES)} fixtures, identity {ident:.2e} (<= 1e-10), bounds {bound:.2e} (<= 1e-12)")


def test_criterion_06_constant_speed(report):
    rng = np.random.default_rng(6)
    grid = (0.0, 0.25, 0.5, 0.75, 1.0)
    worst = 0.0
    for _ in range(20):
        curve, rep = _curve(random_measure(rng), random_measure(rng))
        hk = math.sqrt(rep.value)
        frames = {s: curve.eval(s) for s in grid}
        for i, s in enumerate(grid):
            for t in grid[i + 1:]:
                worst = max(worst, abs(hk_distance(frames[s], frames[t])[0] - (t - s) * hk))
    report(6, worst <= 5e-6, f"20 instances, worst {worst:.2e} (<= 5e-6)")


def test_criterion_07_no_long_transport(report):
    rng = np.random.default_rng(7)
    long = pad = 0.0
    for _ in range(20):
        lam0, lam1 = balanced_cone_pair(rng)
        res = reservoir_distance(lam0, lam1)
        long = max(long, check_no_long_transport(res.plan, slack=1e-9))
        pad = max(pad, abs(reservoir_distance(lam0, lam1, extra=1.0).value - res.value))
        assert math.isfinite(res.value)
    for _ in range(20):
        mu0, mu1 = random_measure(rng, 4, spread=3.0), random_measure(rng, 4, spread=3.0)
        _, plan = hk_via_lifts(mu0, mu1, solve_et(mu0, mu1))
        long = max(long, check_no_long_transport(plan, slack=1e-9))
    ok = long == 0.0 and pad <= 1e-10
    report(7, ok, f"long-transport mass {long:.2e} (= 0), padding change {pad:.2e} (<= 1e-10)")


def test_criterion_08_characteristic_functions(report):
    t0 = time.perf_counter()
    g = char_function_geodesic()
    violation, _ = g.optimality_gap(200)
    elapsed = time.perf_counter() - t0
    dw, dc = abs(g.w_star - 0.4895), abs(g.c_star - 1.0634)
    ok = dw <= 1e-3 and dc <= 1e-3 and violation <= 1e-6 and elapsed < 5.0
    report(8, ok, f"w_* {g.w_star:.6f}, c_* {g.c_star:.6f}, violation {violation:.2e} (<= 1e-6), "
                  f"{elapsed:.2f} s (< 5 s)")


def test_criterion_09_limits(report):
    f = FIXTURES["two_dirac_small_shift"]
    w = wasserstein_limit_check(f.mu0, f.mu1, [1.0, 0.1, 0.01, 0.001])
    rng = np.random.default_rng(9)
    h_final = 0.0
    for _ in range(5):
        mu0, mu1 = random_measure(rng, 3, n_min=3), random_measure(rng, 3, n_min=3)
        h_final = max(h_final, hellinger_limit_check(mu0, mu1, [1.0, 1e-2, 1e-4, 1e-6]).deviations[-1])
    ok = w.monotone and w.deviations[-1] <= 1e-2 and h_final <= 1e-3
    report(9, ok, f"beta: monotone {w.monotone}, final {w.deviations[-1]:.2e} (<= 1e-2); "
                  f"alpha: final {h_final:.2e} (<= 1e-3)")


def test_criterion_10_semiconcavity(report):
    agree = max(abs(w.k_lower - w.solver_k) for w in
                (semiconcavity_witness(b, y) for b in (0.5, 2.0, 10.0, 100.0) for y in (0.1, 0.5, 1.0)))
    phis = [semiconcavity_phi(y) for y in (0.1, 0.5, 1.0, 1.3)]
    big = semiconcavity_witness(1e6, 0.5, solve=False).k_lower
    ok = agree <= 5e-6 and min(phis) > 0 and big > 50
    report(10, ok, f"agreement {agree:.2e} (<= 5e-6), min phi {min(phis):.4f} (> 0), "
                   f"k_lower(b=1e6) {big:.1f}")


def test_criterion_11_pde_residuals(report):
    s_hj = np.linspace(0.3, 0.7, 9)
    s_ce = np.linspace(0.1, 0.9, 9)
    curve2, fld2 = two_dirac_family([0.0, 0.0], [math.pi / 2, 0.0], [(1.0, 1.0), (0.5, 2.0)], b0=0.3, b1=0.2)
    t = np.linspace(0, math.pi / 2, 41)
    seg = np.column_stack([t, np.zeros_like(t)])
    mu1, y0 = dirac_line_example()
    curve_d, fld_d = dilation_geodesic(mu1, y0), dilation_potential(y0)
    g = np.linspace(-1.4, 1.4, 15)
    disk = np.column_stack([a.ravel() for a in np.meshgrid(g, g)])
    disk = disk[np.hypot(*disk.T) < 1.45]
    pairs = {
        "HJ two-Dirac": lambda h: hamilton_jacobi_residual(fld2, s_hj, seg, h),
        "HJ dilation": lambda h: hamilton_jacobi_residual(fld_d, s_hj, disk, h),
        "continuity two-Dirac": lambda h: continuity_residual(curve2, fld2, s_ce, h),
        "continuity dilation": lambda h: continuity_residual(curve_d, fld_d, s_ce, h),
    }
    parts, ok = [], True
    for name, fn in pairs.items():
        r1, r2 = fn(1e-3), fn(5e-4)
        ok &= r1 <= 1e-4 and 3.5 <= r1 / r2 <= 4.5
        parts.append(f"{name} {r1:.1e} (x{r1 / r2:.2f})")
    report(11, ok, "; ".join(parts))


def test_criterion_12_metric_axioms(report):
    rng = np.random.default_rng(12)
    sym = tri = 0.0
    for _ in range(200):
        a, b, c = (random_measure(rng) for _ in range(3))
        ab, ba = hk_distance(a, b)[0], hk_distance(b, a)[0]
        bc, ac = hk_distance(b, c)[0], hk_distance(a, c)[0]
        sym = max(sym, abs(ab - ba))
        tri = max(tri, ac - ab - bc, ab - ac - bc, bc - ab - ac)
    ok = sym <= 1e-6 and tri <= 2e-6
    report(12, ok, f"200 triples, symmetry {sym:.2e} (<= 1e-6), triangle {max(tri, 0.0):.2e} (<= 2e-6)")
