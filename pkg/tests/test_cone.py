import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hkcone.cone import (ConePoint, Params, cone_cost, cone_dist, cone_geodesic, cos_trunc,
                         curve_length_1mp, one_mass_point_cost, one_mass_point_curve)

radii = st.floats(0.0, 3.0, allow_nan=False)
pos = st.lists(st.floats(-4.0, 4.0, allow_nan=False), min_size=2, max_size=2)


def point(x, r):
    return ConePoint(x, r)


def test_cos_trunc_values():
    assert cos_trunc(0.0, math.pi) == 1.0
    assert cos_trunc(4.0, math.pi) == -1.0
    assert abs(cos_trunc(2.0, math.pi / 2)) < 1e-16
    assert cos_trunc(-0.5, math.pi) == math.cos(0.5)
    with pytest.raises(ValueError):
        cos_trunc(1.0, 0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        Params(-1.0, 4.0)
    with pytest.raises(ValueError):
        Params(0.0, 0.0)
    assert not Params(0.0, 0.0, allow_degenerate=True).positive
    with pytest.raises(ValueError):
        Params(0.0, 4.0).scale


def test_tip_points_compare_equal():
    assert ConePoint([1.0, 2.0], 0.0) == ConePoint.tip()
    with pytest.raises(ValueError):
        ConePoint(None, 1.0)
    with pytest.raises(ValueError):
        ConePoint([0.0], -1.0)


def test_cone_dist_examples():
    assert cone_dist(point([0.3], 1.0), ConePoint.tip()) == pytest.approx(1.0, abs=1e-15)
    assert cone_dist(point([0.0], 1.0), point([math.pi], 1.0)) == pytest.approx(2.0, abs=1e-15)
    assert cone_dist(point([0.0], 1.0), point([0.7], 1.0), Params(1.0, 0.0)) == pytest.approx(0.7, abs=1e-15)


def test_boundary_branches():
    assert cone_cost(0.0, 1.0, 3.0, Params(0.0, 4.0)) == pytest.approx(4.0)
    assert cone_cost(0.25, 1.0, 3.0, Params(0.0, 4.0)) == math.inf
    assert cone_cost(0.25, 2.0, 3.0, Params(1.0, 0.0)) == math.inf
    assert cone_cost(0.0, 2.0, 2.0, Params(0.0, 0.0, allow_degenerate=True)) == 0.0
    assert cone_cost(0.1, 2.0, 2.0, Params(0.0, 0.0, allow_degenerate=True)) == math.inf


def test_geodesic_endpoints_and_midpoint():
    z0, z1 = point([0.0, 0.0], 1.0), point([math.pi / 2, 0.0], 1.0)
    g0, g1 = cone_geodesic(0.0, z0, z1), cone_geodesic(1.0, z0, z1)
    assert g0.z == z0 and g0.rho == 0.0
    assert g1.z == z1 and g1.rho == 1.0
    assert cone_geodesic(0.5, z0, z1).r_sq == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        cone_geodesic(1.5, z0, z1)


def test_geodesic_through_the_tip():
    # |dx| >= pi: the position jumps once s r1 >= (1 - s) r0, a tie included
    z0, z1 = point([0.0], 1.0), point([4.0], 1.0)
    assert cone_geodesic(0.4, z0, z1).rho == 0.0
    assert cone_geodesic(0.5, z0, z1).rho == 1.0
    assert cone_geodesic(0.5, z0, z1).z.is_tip
    assert cone_geodesic(0.6, z0, z1).z.x == (4.0,)


def test_one_mass_point_cost_examples():
    assert one_mass_point_cost((math.pi / 2) ** 2, 2.0, 3.0) == pytest.approx(5.0, abs=1e-14)
    assert one_mass_point_cost(0.0, 1.7, 1.7) == 0.0
    assert one_mass_point_cost(1.0, 1.0, 2.0, Params(0.0, 4.0)) == math.inf
    with pytest.raises(ValueError):
        one_mass_point_cost(-1.0, 1.0, 1.0)


def test_one_mass_point_curve_examples():
    assert one_mass_point_curve(0.0, 1.0, 2.0, 3.0) == (2.0, 0.0)
    a1, rho1 = one_mass_point_curve(1.0, 1.0, 2.0, 3.0)
    assert a1 == pytest.approx(3.0) and rho1 == pytest.approx(1.0)
    a, rho = one_mass_point_curve(0.5, math.pi / 2, 1.0, 1.0)
    assert a == pytest.approx(0.5, abs=1e-15)
    assert rho == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        one_mass_point_curve(0.5, math.pi, 1.0, 1.0)


@pytest.mark.parametrize("L", [0.0, 0.4, 1.2, math.pi / 2, 2.5, 3.1])
def test_one_mass_point_curve_matches_cone_geodesic(L):
    a0, a1 = 1.3, 0.4
    z0, z1 = point([0.0], math.sqrt(a0)), point([L], math.sqrt(a1))
    for s in np.linspace(0, 1, 41):
        a, rho = one_mass_point_curve(s, L, a0, a1)
        g = cone_geodesic(float(s), z0, z1)
        assert abs(a - g.r_sq) < 1e-10
        if 0 < s < 1:
            assert abs(rho * L - g.rho * L) < 1e-10


def test_brute_force_midpoint_of_length_functional():
    # minimize the discretized length over (a, rho) at a single free midpoint
    from scipy.optimize import minimize
    L, a0, a1 = math.pi / 2, 1.0, 1.0

    def length(v):
        a = np.array([a0, v[0], a1])
        rho = np.array([0.0, v[1], 1.0])
        return 2 * ((L * L) * np.diff(rho) ** 2 * (a[:-1] + a[1:]) / 2
                    + np.diff(np.sqrt(a)) ** 2).sum()

    res = minimize(length, [0.8, 0.3], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
    a_half, rho_half = one_mass_point_curve(0.5, L, a0, a1)
    assert res.x[1] == pytest.approx(rho_half, abs=1e-6)


def test_curve_length_examples():
    s = np.linspace(0, 1, 1001)
    assert curve_length_1mp(np.full_like(s, 2.0), s, 0.7) == pytest.approx(0.49 * 2.0, abs=1e-12)
    assert curve_length_1mp((1 - s) ** 2 * 3.0, np.zeros_like(s), 0.0) == pytest.approx(3.0, abs=1e-5)
    s = np.linspace(0, 1, 10001)
    a, rho = one_mass_point_curve(s, 1.0, 1.0, 2.0)
    assert abs(curve_length_1mp(a, rho, 1.0) - one_mass_point_cost(1.0, 1.0, 2.0)) < 1e-6


def test_curve_length_second_order():
    exact = one_mass_point_cost(1.0, 1.0, 2.0)
    errs = []
    for n in (201, 401, 801):
        s = np.linspace(0, 1, n)
        a, rho = one_mass_point_curve(s, 1.0, 1.0, 2.0)
        errs.append(abs(curve_length_1mp(a, rho, 1.0) - exact))
    for e0, e1 in zip(errs, errs[1:]):
        assert 3.0 < e0 / e1 < 5.0


@given(pos, radii, pos, radii)
def test_symmetry(x0, r0, x1, r1):
    z0, z1 = point(x0, r0), point(x1, r1)
    assert cone_dist(z0, z1) == cone_dist(z1, z0)


@given(pos, radii, pos, radii, pos, radii)
def test_triangle(x0, r0, x1, r1, x2, r2):
    z = [point(x0, r0), point(x1, r1), point(x2, r2)]
    assert cone_dist(z[0], z[2]) <= cone_dist(z[0], z[1]) + cone_dist(z[1], z[2]) + 1e-12


@given(pos, radii, st.sampled_from([0.5, 4.0, 9.0]))
def test_tip_distance(x, r, beta):
    p = Params(1.0, beta)
    assert cone_dist(point(x, r), ConePoint.tip(), p) == pytest.approx(math.sqrt(4 / beta) * r, abs=1e-13)


@given(pos, radii, pos, radii, st.floats(0, 1), st.floats(0, 1))
def test_constant_speed(x0, r0, x1, r1, s, t):
    z0, z1 = point(x0, r0), point(x1, r1)
    zs, zt = cone_geodesic(s, z0, z1).z, cone_geodesic(t, z0, z1).z
    assert abs(cone_dist(zs, zt) - abs(t - s) * cone_dist(z0, z1)) < 1e-10


@given(st.floats(0.0, 9.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0),
       st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_reparametrization(L_sq, a0, a1, alpha, beta):
    theta = beta / 4
    lhs = one_mass_point_cost(L_sq, a0, a1, Params(alpha, beta))
    rhs = one_mass_point_cost(L_sq * theta / alpha, a0, a1, Params(1.0, beta / theta)) / theta
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
