import math

import numpy as np
import pytest
from scipy.special import ellipk

from hkcone.charfn import (CharConfig, ShootingFailure, calibrate_w_star, char_function_geodesic,
                           elliptic_k, shoot)

QUARTER = math.pi / 4


@pytest.fixture(scope="module")
def geo():
    return char_function_geodesic()


@pytest.mark.parametrize("k", [0.0, 0.1, 0.5, 0.9, 0.999])
def test_elliptic_k_against_scipy(k):
    # scipy takes the parameter m = k^2
    assert elliptic_k(k) == pytest.approx(float(ellipk(k * k)), rel=1e-14)


def test_elliptic_k_domain():
    with pytest.raises(ValueError):
        elliptic_k(1.0)


def test_calibration_values():
    w, c = calibrate_w_star()
    assert elliptic_k(math.sin(w)) * math.sin(w) == pytest.approx(QUARTER, abs=1e-14)
    assert c == pytest.approx(1 / (2 * math.sin(w)), rel=1e-15)
    # frozen from the AGM route
    assert w == pytest.approx(0.48949897, abs=1e-8)
    assert c == pytest.approx(1.0634140266330683, abs=1e-12)


def test_stated_numerics(geo):
    assert abs(geo.w_star - 0.4895) <= 1e-3
    assert abs(geo.c_star - 1.0634) <= 1e-3


def test_shooting_agrees_with_elliptic_route(geo):
    assert abs(geo.c_star - geo.c_elliptic) <= 1e-8
    assert abs(geo.w_star - geo.w_elliptic) <= 1e-7
    assert geo.boundary_mismatch <= 1e-10


def test_boundary_values_and_monotonicity(geo):
    assert geo.h[0] == pytest.approx(math.pi / 2, abs=1e-12)
    assert geo.x[0] == 0.0
    assert np.all(np.diff(geo.h) > 0)
    assert np.all(geo.dh >= 0)


def test_shoot_brackets():
    lo, hi = CharConfig().c_bracket
    f_lo = shoot(lo, samples=False).x_end - QUARTER
    f_hi = shoot(hi, samples=False).x_end - QUARTER
    assert f_lo * f_hi < 0
    with pytest.raises(ShootingFailure):
        char_function_geodesic(CharConfig(c_bracket=(2.0, 5.0)))


def test_optimality_inequality(geo):
    violation, slack = geo.optimality_gap(200)
    assert violation <= 1e-6
    assert slack <= 1e-4


def test_equality_on_the_graph(geo):
    complementarity, derivative = geo.equality_residual()
    assert complementarity <= 1e-12
    assert derivative <= 1e-3


def test_marginals_agree(geo):
    m0, m1 = geo.marginal_masses()
    assert abs(m0 - m1) <= 1e-8
    assert 0 < m0 < QUARTER


def test_frames_at_the_ends(geo):
    y, f = geo.frame(0.0)
    np.testing.assert_allclose(f, 1.0, atol=1e-12)
    y, f = geo.frame(1.0)
    np.testing.assert_allclose(f, 1.0, atol=1e-6)
    for s in (0.25, 0.5, 0.75):
        y, f = geo.frame(s)
        assert np.all(np.diff(y) > 0)
        assert np.all(f > 0)


def test_frame_rows_wings(geo):
    rows = geo.frame_rows([0.3], wing_points=5)
    left, right = rows[:5], rows[-5:]
    assert [r[1] for r in left] == pytest.approx(np.linspace(-QUARTER, 0.0, 5).tolist())
    assert all(r[2] == pytest.approx(0.49) for r in left)
    assert [r[1] for r in right] == pytest.approx(np.linspace(3 * QUARTER, math.pi, 5).tolist())
    assert all(r[2] == pytest.approx(0.09) for r in right)
    assert all(r[0] == 0.3 for r in rows)


def test_step_refinement_is_stable():
    coarse = char_function_geodesic(CharConfig(step=2e-4))
    fine = char_function_geodesic()
    assert abs(coarse.c_star - fine.c_star) <= 1e-8
