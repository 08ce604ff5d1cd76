from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import sawtooth as sw
from artifact import sectors

params = st.builds(
    sw.SawtoothParams,
    a_L=st.floats(-3, 1),
    a_R=st.floats(1.001, 20),
    w=st.floats(0, 1, exclude_max=True),
)


def cell_centres(lo, hi, n):
    return np.linspace(lo, hi, n, endpoint=False) + (hi - lo) / (2 * n)


def test_slopes_out_of_range_are_rejected():
    with pytest.raises(ValueError):
        sw.SawtoothParams(1.2, 2.0, 0.1)
    with pytest.raises(ValueError):
        sw.SawtoothParams(0.5, 1.0, 0.1)


@settings(max_examples=200)
@given(params)
def test_kink_position_and_invertibility(p):
    assert 0 < p.z_sw <= 1
    assert p.invertible == (p.a_L > 0)


def test_kink_is_fixed_when_w_is_zero():
    p = sw.SawtoothParams(0.5, 2.0, 0.0)
    assert sw.sw_step(p, p.z_sw) == pytest.approx(p.z_sw, abs=1e-15)


def test_worked_example():
    p = sw.SawtoothParams(0.5, 2.0, 0.25)
    assert p.z_sw == pytest.approx(2 / 3)
    assert sw.sw_step(p, 0.0) == pytest.approx(0.25 + 0.5 * (-2 / 3) + 2 / 3, abs=1e-15)


@settings(max_examples=200)
@given(params)
def test_branches_agree_at_the_kink(p):
    zs = p.z_sw
    left = p.w + p.a_L * (zs - zs) + zs
    right = p.w + p.a_R * (zs - zs) + zs
    assert abs(left - right) < 1e-15
    assert sw.sw_lift(p, zs) == left


def test_turn_count_is_an_integer(rng):
    for _ in range(10_000):
        p = sw.SawtoothParams(rng.uniform(-3, 1), rng.uniform(1.001, 20), rng.uniform(-2, 2))
        z = rng.uniform()
        gap = sw.sw_lift(p, z) - sw.sw_step(p, z)
        assert gap == round(gap)
        assert sw.delta_k(p, z) == round(gap)


@settings(max_examples=300)
@given(params, st.floats(0, 1, exclude_max=True))
def test_turns_are_bounded_by_the_lift_range(p, z):
    # an increasing lift ranges over [w + z_sw (1 - a_L), w + 1 + z_sw (1 - a_L)]
    if p.a_L <= 0:
        return
    assert 0 <= sw.delta_k(p, z) <= 2
    if p.w + p.z_sw * (1 - p.a_L) < 1:
        assert sw.delta_k(p, z) in (0, 1)


@pytest.mark.parametrize("w", [0.1, 0.37, 0.8])
def test_turns_at_the_kink(w):
    p = sw.SawtoothParams(0.5, 3.0, w)
    assert sw.delta_k(p, p.z_sw) == int(np.floor(w + p.z_sw))


@pytest.mark.parametrize("w", [0.0, 0.25, 1 / 3, 0.61803398875, 0.9])
def test_rigid_rotation_edge(w):
    p = sw.SawtoothParams(1.0, 4.0, w)
    assert p.z_sw == 1
    res = sw.rotation_number(p, n_iter=20_000)
    assert abs(res.rho - w) < 1e-9
    assert abs(sw.lyapunov(p, 2000)) < 1e-12


def test_zero_shift_gives_zero_rotation():
    assert sw.rotation_number(sw.SawtoothParams(0.4, 3.0, 0.0)).rho == 0


def test_rotation_number_is_monotone_in_w():
    ws = np.linspace(0, 0.99, 60)
    rhos = [sw.rotation_number(sw.SawtoothParams(0.4, 3.0, w), n_iter=5000).rho for w in ws]
    assert all(b >= a - 1e-6 for a, b in zip(rhos, rhos[1:]))


@pytest.mark.parametrize("w", [0.13, 0.42, 0.77])
def test_rotation_number_does_not_depend_on_the_seed(w):
    p = sw.SawtoothParams(0.6, 2.5, w)
    # lifts of nearby seeds stay within one turn, so the spread is below 1 / n_iter
    rhos = [sw.rotation_number(p, n_iter=2_000_000, z0=z0).rho for z0 in np.arange(16) / 16]
    assert max(rhos) - min(rhos) < 1e-6


def test_snapped_orbit_closes():
    p = sw.SawtoothParams(0.3, 5.0, 0.45)
    res = sw.rotation_number(p)
    assert res.snapped is not None and res.orbit is not None
    z = res.orbit.points[0]
    assert sw.circle_dist(sw.trace(p, z, res.orbit.period)[-1], z) < 1e-10
    assert res.snapped == Fraction(sum(res.orbit.turns), res.orbit.period)


def test_noninvertible_maps_are_flagged():
    assert sw.rotation_number(sw.SawtoothParams(-0.5, 3.0, 0.3)).flagged_noninvertible


def test_lyapunov_of_a_stable_cycle():
    p = sw.SawtoothParams(0.3, 5.0, 0.45)
    orbit = sw.rotation_number(p).orbit
    expected = np.log(abs(orbit.multiplier)) / orbit.period
    assert sw.lyapunov(p, 4000) == pytest.approx(expected, rel=1e-9)
    assert expected < 0


def test_lyapunov_needs_enough_iterates():
    with pytest.raises(ValueError):
        sw.lyapunov(sw.SawtoothParams(0.3, 5.0, 0.45), 100)


@settings(max_examples=100)
@given(st.floats(0.05, 1), st.floats(1.001, 10), st.floats(0, 1, exclude_max=True))
def test_lift_is_non_decreasing_when_invertible(a_L, a_R, w):
    p = sw.SawtoothParams(a_L, a_R, w)
    zs = np.linspace(0, 1, 200, endpoint=False)
    lifts = np.array([sw.sw_lift(p, z) for z in zs])
    assert np.all(np.diff(lifts) >= -1e-12)


def test_trace_starts_at_seed():
    p = sw.SawtoothParams(0.5, 2.0, 0.25)
    t = sw.trace(p, 0.0, 3)
    assert t[0] == 0 and t[1] == pytest.approx(7 / 12)


def test_solve_orbit_recovers_detected_cycle():
    p = sw.SawtoothParams(0.3, 5.0, 0.45)
    orbit = sw.rotation_number(p).orbit
    again = sw.solve_orbit(p, orbit.branches, orbit.turns)
    assert again is not None
    assert np.allclose(again.points, orbit.points, atol=1e-9)
    assert again.multiplier == pytest.approx(orbit.multiplier)


@pytest.fixture(scope="module")
def rule_338(point_338):
    return sectors.SawtoothRule.from_spec(sectors.sector_spec(point_338, 1, 2, 0))


@pytest.fixture(scope="module")
def rule_225(point_225):
    return sectors.SawtoothRule.from_spec(sectors.sector_spec(point_225, 1, 2, 0))


def test_half_tongue_has_two_itinerary_types(rule_338):
    th = cell_centres(rule_338.theta_min, rule_338.theta_max, 40)
    w = cell_centres(0, 1, 40)
    grid = sw.tongue_scan(rule_338, w, th)
    half = np.argwhere((grid.num == 1) & (grid.den == 2))
    kinds = set()
    for i, j in half:
        orbit = sw.rotation_number(sw.SawtoothParams(*rule_338.slopes(th[i]), w[j])).orbit
        assert sorted(orbit.turns) == [0, 1]
        kinds.add("".join(sorted(orbit.branches)))
    assert kinds == {"LL", "LR"}


def test_tongues_touch_the_rigid_edge_at_their_rotation_number(rule_338):
    th = rule_338.theta_min
    for frac in (Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)):
        p = sw.SawtoothParams(*rule_338.slopes(th), float(frac))
        assert p.a_L == pytest.approx(1)
        res = sw.rotation_number(sw.SawtoothParams(1.0, p.a_R, float(frac)))
        assert res.snapped == frac


@pytest.fixture(scope="module")
def scan_225(rule_225):
    th = cell_centres(rule_225.theta_min, rule_225.theta_max, 24)
    w = cell_centres(0, 1, 24)
    return sw.tongue_scan(rule_225, w, th, seeds=8)


def test_negative_left_slope_in_the_225_rule(rule_225):
    a_L, a_R = rule_225.slopes(0.5 * (rule_225.theta_min + rule_225.theta_max))
    assert a_L < 0 < 1 < a_R


def test_stability_loss_is_detected(scan_225, rule_225):
    assert scan_225.stability_loss.any()
    i, j = np.argwhere(scan_225.stability_loss)[0]
    lo, hi = scan_225.theta[max(i - 1, 0)], scan_225.theta[min(i + 1, len(scan_225.theta) - 1)]
    brs = scan_225.branches[i, j]
    turns = sw.rotation_number(sw.SawtoothParams(*rule_225.slopes(scan_225.theta[i]), scan_225.w[j])).orbit.turns
    crit = sw.multiplier_minus_one_theta(rule_225, scan_225.w[j], brs, turns, lo, hi)
    assert crit is not None and lo <= crit <= hi


def test_chaotic_cell_exists(scan_225):
    assert (scan_225.lyap > 0).any()


def test_coexisting_attractors_exist(scan_225):
    assert (scan_225.n_attr >= 2).any()


def test_scan_is_independent_of_worker_count(rule_338):
    th = cell_centres(rule_338.theta_min, rule_338.theta_max, 4)
    w = cell_centres(0, 1, 5)
    one = sw.tongue_scan(rule_338, w, th, threads=1)
    two = sw.tongue_scan(rule_338, w, th, threads=2)
    np.testing.assert_array_equal(one.num, two.num)
    np.testing.assert_array_equal(one.den, two.den)
    np.testing.assert_array_equal(one.lyap, two.lyap)
