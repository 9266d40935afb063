import math

import numpy as np
import pytest
from conftest import points_in_rect, points_in_strips
from hypothesis import given, settings
from hypothesis import strategies as st

from coinbilliard import kernels as K
from coinbilliard.core import CoinParams, FullState, PhasePoint, energy_of, to_full_state
from coinbilliard.dynamics import (
    flight_time,
    fly_to_next_collision,
    inverse_map_batch,
    inverse_return_map,
    iterate,
    jacobian_analytic,
    jacobian_determinant,
    jacobian_fd,
    parabola_from_launch,
    reflect,
    return_map,
    return_map_batch,
    simulate_full,
)
from coinbilliard.errors import BranchCrossing, CornerAngle, OffSection, StepError
from coinbilliard.horseshoe import theta_b


def test_reflect_at_peak_flips_vertical_only():
    out = reflect(FullState(math.pi / 2, 1.0, 0.3, -1.0, "pre-collision"))
    assert out.theta_dot == pytest.approx(0.3, abs=1e-15)
    assert out.y_dot == pytest.approx(1.0, abs=1e-15)
    assert out.side == "post-collision"


def test_reflect_at_quarter_pi():
    out = reflect(FullState(math.pi / 4, math.sin(math.pi / 4), 0.0, -1.0))
    assert out.theta_dot == pytest.approx(-2 * math.sqrt(2) / 3, abs=1e-15)
    assert out.y_dot == pytest.approx(1 / 3, abs=1e-15)
    assert out.theta_dot**2 + out.y_dot**2 == pytest.approx(1.0, abs=1e-15)


def test_reflect_refuses_corners():
    with pytest.raises(CornerAngle):
        reflect(FullState(math.pi, 0.0, 1.0, -1.0))


@settings(max_examples=1000)
@given(
    st.floats(-20.0, 20.0).filter(lambda t: abs(math.sin(t)) > 1e-6),
    st.floats(-100.0, 100.0),
    st.floats(-100.0, -1e-3),
)
def test_reflect_is_an_energy_preserving_involution(theta, thd, yd):
    s = FullState(theta, abs(math.sin(theta)), thd, yd)
    once = reflect(s)
    twice = reflect(once)
    assert abs(twice.theta_dot - thd) <= 1e-12 * max(1.0, abs(thd), abs(yd))
    assert abs(twice.y_dot - yd) <= 1e-12 * max(1.0, abs(thd), abs(yd))
    p = CoinParams(E=1e6)
    assert energy_of(once, p) == pytest.approx(energy_of(s, p), rel=1e-12)


def test_vertical_flight_returns_to_launch(params):
    w = 3.0
    s = FullState(math.pi / 2, 1.0, 0.0, w, "post-collision")
    out = fly_to_next_collision(s, params)
    assert out.theta == math.pi / 2
    assert out.y == pytest.approx(1.0, abs=1e-12)
    assert out.y_dot == pytest.approx(-w, rel=1e-12)
    assert flight_time(s, params) == pytest.approx(2 * w / params.g_eff, rel=1e-12)


def test_flight_from_reflected_corner_a(params, dom):
    th_a, thd_a = dom.corner_a()
    post = reflect(to_full_state(PhasePoint(th_a, thd_a), params))
    out = fly_to_next_collision(post, params)
    assert out.theta == pytest.approx(th_a - math.pi, abs=1e-8)
    assert energy_of(out, params) == pytest.approx(params.E, rel=1e-10)


def test_reference_points_a_b_c(params, dom):
    h = dom.theta_dot_star
    fa, _ = return_map(PhasePoint(math.pi / 2 - dom.k / params.E, h), params)
    assert fa.theta == pytest.approx(-math.pi / 2 - dom.k / params.E, abs=1e-8)

    tb = theta_b(dom, params)
    fb, parab = return_map(PhasePoint(tb, h), params)
    assert fb.theta == pytest.approx(tb, abs=1e-8)
    assert fb.theta_dot == pytest.approx(0.0, abs=1e-8)
    assert parab.degenerate or abs(parab.beta - tb) < 1e-8

    fc, _ = return_map(PhasePoint(math.pi / 2, h), params)
    assert fc.theta_dot == pytest.approx(h, abs=1e-8)


def test_inverse_of_point_b(params, dom):
    tb = theta_b(dom, params)
    back = inverse_return_map(PhasePoint(tb, 0.0), params)
    assert back.theta == pytest.approx(tb, abs=1e-8)
    assert back.theta_dot == pytest.approx(dom.theta_dot_star, abs=1e-8)


def test_inverse_then_forward_on_D(params, dom):
    worst = 0.0
    for p in points_in_rect(dom.L, 500, 1) + points_in_rect(dom.R, 500, 2):
        q, _ = return_map(p, params)
        r = inverse_return_map(q, params)
        worst = max(worst, abs(r.theta - p.theta), abs(r.theta_dot - p.theta_dot))
    assert worst < 1e-8


def test_forward_after_inverse_on_strips(params, fam):
    worst = 0.0
    for p in points_in_strips(fam, 1000, 3):
        r, _ = return_map(inverse_return_map(p, params), params)
        worst = max(worst, abs(r.theta - p.theta), abs(r.theta_dot - p.theta_dot))
    assert worst < 1e-8


def test_preimage_off_the_downward_section(params):
    # the backward orbit meets the arc near pi while rising
    with pytest.raises(OffSection):
        inverse_return_map(PhasePoint(1.5708407493691676, -0.005526274162272291), params)


def test_parabola_passes_through_both_footpoints(params):
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(200):
        p = PhasePoint(rng.uniform(0.2, math.pi - 0.2) + math.pi * rng.integers(0, 2), rng.uniform(-5, 5))
        try:
            q, parab = return_map(p, params)
        except OffSection:
            continue
        checked += 1
        assert not parab.degenerate
        assert parab.alpha < 0
        for th in (p.theta, q.theta):
            y = abs(math.sin(th))
            assert abs(parab.height(th) - y) <= 1e-10 * max(1.0, abs(parab.gamma))
    assert checked > 100


def test_upward_arrival_is_off_section(params):
    # launched nearly horizontally next to the corner at pi, the orbit meets
    # the rising arc while still climbing
    with pytest.raises(OffSection):
        return_map(PhasePoint(3.3213532385372706, 1.8105092007009818), params)


def test_degenerate_parabola_for_vertical_launch():
    parab = parabola_from_launch(1.0, 0.5, 0.0, 2.0, 1.0)
    assert parab.degenerate and parab.beta == 1.0
    assert parab.gamma == pytest.approx(0.5 + 2.0)


def test_energy_drift_over_1000_collisions(params):
    rng = np.random.default_rng(5)
    for _ in range(5):
        p = PhasePoint(rng.uniform(0.3, 2.8), rng.uniform(-1, 1))
        states = simulate_full(to_full_state(p, params), 1000, params)
        drift = max(abs(energy_of(s, params) - params.E) for s in states) / params.E
        assert drift < 1e-7
        assert all(s.side == "pre-collision" for s in states)


def test_iterate_tags_the_failing_step(params):
    with pytest.raises(StepError) as exc:
        iterate(PhasePoint(math.pi, 0.0), 3, params)
    assert exc.value.index == 0


def test_batch_matches_scalar(params):
    rng = np.random.default_rng(6)
    th = rng.uniform(0.2, 6.0, 200)
    td = rng.uniform(-2, 2, 200)
    t1, d1, status = return_map_batch(th, td, params)
    for i in range(0, 200, 17):
        if status[i] == K.OK:
            q, _ = return_map(PhasePoint(th[i], td[i]), params)
            assert (t1[i], d1[i]) == (q.theta, q.theta_dot)
    b0, b1, bst = inverse_map_batch(t1, d1, params)
    ok = (status == K.OK) & (bst == K.OK)
    assert np.max(np.abs(b0[ok] - th[ok])) < 1e-6


def test_jacobian_matches_finite_differences(params, dom):
    errors = []
    for p in points_in_rect(dom.L, 300, 7):
        if len(errors) == 100:
            break
        try:
            fd = jacobian_fd(p, params).as_array()
        except BranchCrossing:
            continue  # image within a stencil of a corner
        an = jacobian_analytic(p, params).as_array()
        errors.append(np.max(np.abs(an - fd) / np.abs(an)))
    assert len(errors) == 100
    assert max(errors) < 1e-5


def test_jacobian_entries_positive_on_D(params, dom):
    for p in points_in_rect(dom.L, 50, 8) + points_in_rect(dom.R, 50, 9):
        assert np.all(jacobian_analytic(p, params).as_array() > 0)


def test_closed_form_determinant(params, dom):
    for p in points_in_rect(dom.L, 50, 10) + [PhasePoint(1.1, 0.4), PhasePoint(4.0, -2.0)]:
        J = jacobian_analytic(p, params)
        assert jacobian_determinant(p, params) == pytest.approx(np.linalg.det(J.as_array()), rel=1e-8)
        assert J.det == pytest.approx(np.linalg.det(J.as_array()), rel=1e-8)


def test_fd_at_point_b(params, dom):
    p = PhasePoint(theta_b(dom, params), dom.theta_dot_star)
    an = jacobian_analytic(p, params)
    fd = jacobian_fd(p, params, 1e-6)
    assert fd.d_thd1_d_thd == pytest.approx(an.d_thd1_d_thd, rel=1e-4)


def test_fd_error_is_second_order(params):
    p = PhasePoint(math.pi / 2 + 2e-5, 0.003)
    an = jacobian_analytic(p, params).as_array()
    err = [np.max(np.abs(jacobian_fd(p, params, h).as_array() - an) / np.abs(an)) for h in (1e-5, 5e-6)]
    assert 3.0 < err[0] / err[1] < 5.0


def test_fd_refuses_a_stencil_across_a_corner(params):
    with pytest.raises(BranchCrossing):
        jacobian_fd(PhasePoint(math.pi + 1e-7, 0.1), params, 1e-6)


def test_image_of_top_edge_is_increasing(params, dom):
    r = dom.L
    th = np.linspace(r.left, r.right, 1000)
    t1, d1, status = return_map_batch(th, np.full_like(th, r.half_height), params)
    assert np.all(status == K.OK)
    assert np.all(np.diff(t1) > 0)
    assert np.all(np.diff(d1) > 0)
