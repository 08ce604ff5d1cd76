import numpy as np
import pytest

from artifact import shrink
from artifact.symbolic import RotationalParams

THETA_PLUS_338 = {0: 5.1288, 1: 4.9844, -1: 6.1315, -2: 6.2705}
THETA_MINUS_338 = {-1: 1.6222, 0: 2.1401, 1: 3.0002, 2: 3.1268}
THETA_225 = {(1, 0): 4.9786, (1, -1): 6.0014, (-1, 0): 2.2254, (-1, 1): 3.0811}


@pytest.fixture(params=["338", "225"])
def point(request, point_338, point_225):
    return point_338 if request.param == "338" else point_225


def test_located_point_solves_both_conditions(point):
    en = shrink.eta_nu(point.pslice, point.base, point.xi)
    assert np.linalg.norm(en) < 1e-10


def test_only_two_cycle_points_touch_the_switching_manifold(point):
    zero = (point.l * point.d) % point.n
    assert abs(point.t[0]) < 1e-10 and abs(point.t[zero]) < 1e-10
    assert np.delete(np.abs(point.t), [0, zero]).min() > 1e-3


def test_four_t_identity(point):
    assert point.four_t_residual() < 1e-8


def test_jacobian_is_nonsingular(point):
    assert abs(np.linalg.det(point.J)) > 1e-8


def test_contraction_and_c(point):
    assert point.rho_max < 1
    assert point.c > 0
    assert abs(point.lam_S - 1) < 1e-8


def test_genericity_report(point):
    rep = shrink.genericity_report(point)
    assert rep["generic"] and rep["rho_max_below_one"] and rep["c_positive"]
    for key in ("e1_adj_B", "a", "b"):
        assert abs(rep[key]) > 1e-6


@pytest.mark.parametrize("j", range(8))
def test_unit_eigenvector_normalisation(point_338, j):
    u, v = point_338.eigvecs(j)
    assert abs(u @ v - 1) < 1e-10
    assert abs(v[0] - 1) < 1e-10


def test_finite_difference_jacobian_matches_richardson(point_338):
    fun = lambda z: shrink.eta_nu(point_338.pslice, point_338.base, z)  # noqa: E731
    xi = point_338.xi + np.array([0.01, -0.005])
    J = shrink.fd_jacobian(fun, xi)
    for col, e in enumerate(np.eye(2)):
        h = 1e-3
        d1 = (fun(xi + h * e) - fun(xi - h * e)) / (2 * h)
        d2 = (fun(xi + h / 2 * e) - fun(xi - h / 2 * e)) / h
        rich = (4 * d2 - d1) / 3
        np.testing.assert_allclose(J[:, col], rich, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("offset", [(1e-3, 1e-3), (-1e-3, 1e-3), (1e-3, -1e-3)])
def test_perturbed_start_reconverges(fig_slice, point_338, offset):
    again = shrink.locate(fig_slice, RotationalParams(3, 3, 8), point_338.xi + np.array(offset))
    assert np.linalg.norm(again.xi - point_338.xi) < 1e-9


def test_reported_coordinates(point_338, point_225):
    np.testing.assert_allclose(point_338.xi, [-1.36039455, 0.13981118], atol=1e-7)
    assert abs(point_338.rho_max - 0.29572) < 1e-4
    assert abs(point_225.a - (-8.2)) < 1e-6


def test_small_l_is_rejected(fig_slice):
    with pytest.raises(ValueError):
        shrink.locate(fig_slice, RotationalParams(1, 3, 8), (-1.36, 0.14))


def test_newton_failure_is_reported():
    with pytest.raises(shrink.NoConvergence):
        shrink.newton2(lambda z: np.array([z[0] ** 2 + 1, z[1]]), (0.5, 0.0), max_iter=5)


@pytest.mark.parametrize("dl, expected", sorted(THETA_PLUS_338.items()))
def test_theta_plus_for_338(point_338, dl, expected):
    assert abs(shrink.theta(point_338, 1, dl) - expected) < 1e-3


@pytest.mark.parametrize("dl, expected", sorted(THETA_MINUS_338.items()))
def test_theta_minus_for_338(point_338, dl, expected):
    assert abs(shrink.theta(point_338, -1, dl) - expected) < 1e-3


@pytest.mark.parametrize("key, expected", sorted(THETA_225.items()))
def test_theta_for_225(point_225, key, expected):
    sign, dl = key
    assert abs(shrink.theta(point_225, sign, dl) - expected) < 1e-3


@pytest.mark.parametrize("sign, dl", [(1, d) for d in THETA_PLUS_338] + [(-1, d) for d in THETA_MINUS_338])
def test_theta_lies_in_its_quadrant(point_338, sign, dl):
    assert point_338.a < 0
    lo, hi = shrink.theta_interval(sign, point_338.a)
    assert lo < shrink.theta(point_338, sign, dl) < hi
    assert (lo, hi) == ((1.5 * np.pi, 2 * np.pi) if sign > 0 else (0.5 * np.pi, np.pi))


def test_quadrants_swap_with_sign_of_a():
    assert shrink.theta_interval(1, 1.0) == shrink.theta_interval(-1, -1.0)
    assert shrink.theta_interval(-1, 1.0) == shrink.theta_interval(1, -1.0)


def test_kappa_signs_for_225(point_225):
    assert shrink.kappa(point_225, 1, 0) < 0
    assert shrink.kappa(point_225, 1, -1) > 0


def test_kappa_ratios_match_slope_ratios_for_225(point_225):
    a, b = point_225.a, point_225.b
    k = lambda s, dl: shrink.kappa(point_225, s, dl)  # noqa: E731
    assert abs(-(a * k(1, -1)) / (b * k(1, 0)) - (-38 / 3)) < 1e-3
    assert abs(-(a * k(-1, 0)) / (b * k(-1, 1)) - 21.5) < 1e-3


@pytest.mark.parametrize("sign", [1, -1])
def test_both_kappa_branches_are_finite(point_338, sign):
    for dl in (-1, 0, 1, 2):
        assert np.isfinite(shrink.kappa(point_338, sign, dl))


def test_kappa_table_shape(point_338):
    tab = shrink.kappa_table(point_338, -2, 2)
    assert tab.dls == [-2, -1, 0, 1, 2]
    assert len(tab.theta_plus) == len(tab.theta_minus) == 5
