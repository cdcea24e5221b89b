import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import measures
from hkcone.cone import Params, cone_cost
from hkcone.cone_ot import (ValueMismatch, assignment_bruteforce, check_no_long_transport, exact_transport,
                            hk_via_lifts, reservoir_distance, reservoir_kappa, wasserstein_cone,
                            wasserstein_sq)
from hkcone.et_solver import solve_et
from hkcone.suites import balanced_cone_pair
from hkcone.measure import ConeMeasure, ConePlan, DiscreteMeasure, special_lift


def cm(x, r, w, tip=0.0):
    return ConeMeasure(np.array(x, dtype=float).reshape(len(r), -1), r, w, tip)


def test_exact_transport_small():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    value, P = exact_transport([1.0, 2.0], [1.0, 2.0], C)
    assert value == 0.0
    np.testing.assert_allclose(P, np.diag([1.0, 2.0]), atol=1e-12)
    value, P = exact_transport([3.0], [1.0, 2.0], C[:1])
    assert value == 2.0


def test_wasserstein_cone_examples():
    lam = cm([[0.0], [1.0]], [1.0, 2.0], [1.0, 0.5])
    res = wasserstein_cone(lam, lam)
    assert res.value == 0.0 and res.balanced
    pair = wasserstein_cone(cm([[0.0]], [1.0], [1.0]), cm([[math.pi / 2]], [1.0], [1.0]))
    assert pair.value == pytest.approx(2.0, abs=1e-15)
    assert wasserstein_cone(cm([[0.0]], [1.0], [1.0]), cm([[0.0]], [1.0], [2.0])).value == math.inf


def test_reservoir_kappa_examples():
    assert reservoir_kappa(cm([[0.0]], [1.0], [1.0]), cm([[1.0]], [1.0], [1.0])) == 1.0
    assert reservoir_kappa(cm([[0.0]], [1.0], [1.0], tip=3.0), cm([[1.0]], [1.0], [1.0], tip=2.0)) == 0.0
    empty = ConeMeasure(np.zeros((0, 1)), [], [], tip=3.0, dim=1)
    assert reservoir_kappa(cm([[0.0]], [1.0], [2.0]), empty) == 0.0


@pytest.mark.parametrize("L", [0.2, 1.0, 1.5])
def test_padded_two_dirac(L):
    a0, a1 = 1.0, 2.5
    res = reservoir_distance(cm([[0.0]], [math.sqrt(a0)], [1.0]), cm([[L]], [math.sqrt(a1)], [1.0]))
    assert res.value == pytest.approx(a0 + a1 - 2 * math.sqrt(a0 * a1) * math.cos(L), abs=1e-12)


def test_unbalanced_reservoir_is_infinite():
    assert reservoir_distance(cm([[0.0]], [1.0], [1.0]), cm([[0.0]], [1.0], [2.0])).value == math.inf


def test_no_long_transport_examples():
    long = ConePlan([[0.0]], [1.0], [[3.0]], [1.0], [0.5])
    assert check_no_long_transport(long) == 0.5
    tip = ConePlan([[0.0]], [1.0], [[0.0]], [0.0], [0.5])
    assert check_no_long_transport(tip) == 0.0


def test_hk_via_lifts_two_diracs():
    a0, a1, L = 1.0, 2.0, 0.8
    mu0, mu1 = DiscreteMeasure([[0.0]], [a0]), DiscreteMeasure([[L]], [a1])
    value, plan = hk_via_lifts(mu0, mu1, solve_et(mu0, mu1))
    assert len(plan) == 1
    assert value == pytest.approx(a0 + a1 - 2 * math.sqrt(a0 * a1) * math.cos(L), abs=1e-10)
    mu1 = DiscreteMeasure([[2.0]], [a1])
    value, plan = hk_via_lifts(mu0, mu1, solve_et(mu0, mu1))
    assert len(plan) == 2 and value == pytest.approx(a0 + a1)
    assert sorted(plan.r0.tolist()) == [0.0, 1.0]


def test_hk_via_lifts_rejects_wrong_report():
    mu0, mu1 = DiscreteMeasure([[0.0]], [1.0]), DiscreteMeasure([[0.5]], [2.0])
    other = solve_et(mu0, DiscreteMeasure([[0.5]], [1.0]))
    with pytest.raises(ValueMismatch):
        hk_via_lifts(mu0, mu1, other)


def test_wasserstein_sq():
    mu0 = DiscreteMeasure([[0.0], [1.0]], [1.0, 1.0])
    mu1 = DiscreteMeasure([[0.5], [2.0]], [1.0, 1.0])
    assert wasserstein_sq(mu0, mu1) == pytest.approx(0.25 + 1.0)
    assert wasserstein_sq(mu0, mu1.scaled(2.0)) == math.inf


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_matches_permutation_oracle(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        lam0 = cm(rng.uniform(0, 2, (n, 2)), rng.uniform(0.3, 2, n), np.ones(n))
        lam1 = cm(rng.uniform(0, 2, (n, 2)), rng.uniform(0.3, 2, n), np.ones(n))
        diff = lam0.positions[:, None, :] - lam1.positions[None, :, :]
        C = cone_cost(np.sum(diff ** 2, axis=-1), lam0.radii[:, None], lam1.radii[None, :], Params())
        assert wasserstein_cone(lam0, lam1).value == pytest.approx(assignment_bruteforce(C), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_reservoir_properties(seed):
    lam0, lam1 = balanced_cone_pair(np.random.default_rng(seed))
    base = reservoir_distance(lam0, lam1)
    assert math.isfinite(base.value)
    assert check_no_long_transport(base.plan, slack=1e-9) <= 1e-12
    for extra in (0.5, 3.0):
        assert abs(reservoir_distance(lam0, lam1, extra=extra).value - base.value) <= 1e-10
    with pytest.raises(ValueError):
        reservoir_distance(lam0, lam1, extra=-1.0)


@given(measures(3), measures(3))
def test_lift_cost_matches_et(mu0, mu1):
    report = solve_et(mu0, mu1)
    value, plan = hk_via_lifts(mu0, mu1, report)
    assert abs(value - report.value) <= 2e-6


def _balance(lam0, lam1):
    gap = lam0.total_weight - lam1.total_weight
    return (lam0, lam1.with_tip(gap)) if gap > 0 else (lam0.with_tip(-gap), lam1)


@given(measures(3), st.floats(0.3, 3.0), measures(3), st.floats(0.3, 3.0))
def test_lifts_bound_hk_from_above(mu0, r0, mu1, r1):
    hk_sq = solve_et(mu0, mu1).value
    lam0, lam1 = _balance(special_lift(mu0, r0), special_lift(mu1, r1))
    assert reservoir_distance(lam0, lam1).value >= hk_sq - 1e-6


@given(measures(3), measures(3))
def test_calibration_lifts_attain_hk(mu0, mu1):
    report = solve_et(mu0, mu1)
    _, plan = hk_via_lifts(mu0, mu1, report)
    lam0, lam1 = plan.marginals()
    assert abs(reservoir_distance(lam0, lam1).value - report.value) <= 2e-6
