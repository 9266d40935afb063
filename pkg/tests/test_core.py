import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coinbilliard.core import (
    CoinParams,
    FullState,
    PhasePoint,
    coarse_label,
    corner_distance,
    energy_of,
    to_cylinder,
    to_full_state,
    wrap_theta,
    ydot_from,
)
from coinbilliard.errors import CornerAngle, EnergyDeficit

angles = st.floats(-1e3, 1e3, allow_nan=False)


def test_defaults_give_unit_inertia():
    p = CoinParams()
    assert (p.m, p.l, p.I, p.g) == (1.0, 2.0, 1.0, 1.0)
    assert p.g_eff == 1.0


def test_inertia_and_effective_gravity():
    p = CoinParams(E=100.0, m=2.0, l=1.0, g=3.0)
    assert p.I == 2.0 * 1.0 / 4.0
    assert p.g_eff == pytest.approx(3.0 * math.sqrt(2.0 / 0.5))
    assert p.height_scale == pytest.approx(0.5)


@pytest.mark.parametrize("kw", [{"m": 0.0}, {"l": -1.0}, {"g": 0.0}])
def test_nonpositive_constants_rejected(kw):
    with pytest.raises(ValueError):
        CoinParams(**kw)


def test_energy_must_reach_the_peak():
    with pytest.raises(EnergyDeficit):
        CoinParams(E=1.0)
    with pytest.raises(EnergyDeficit):
        CoinParams(E=1.5, l=1.0)  # g_eff = 2


def test_energy_of_examples(params):
    assert energy_of(FullState(math.pi / 2, 1.0, 0.0, 0.0), params) == 1.0
    assert energy_of(FullState(math.pi / 2, 1.0, 0.0, -2.0), params) == 3.0


def test_ydot_from_examples():
    assert ydot_from(PhasePoint(math.pi / 2, 0.0), CoinParams(E=1.5)) == pytest.approx(-1.0)
    assert ydot_from(PhasePoint(math.pi / 2, 1.0), CoinParams(E=2.0)) == pytest.approx(-1.0)
    with pytest.raises(EnergyDeficit):
        ydot_from(PhasePoint(math.pi / 2, 2.0), CoinParams(E=1.0 + 1e-12))


def test_wrap_examples():
    assert wrap_theta(5 * math.pi / 2) == pytest.approx(math.pi / 2)
    assert wrap_theta(-math.pi / 2) == pytest.approx(3 * math.pi / 2)
    assert wrap_theta(math.pi / 2) == math.pi / 2
    assert wrap_theta(-1e-300) == 0.0


def test_wrap_accepts_arrays():
    out = wrap_theta(np.array([-math.pi / 2, 7.0]))
    assert out.shape == (2,)
    assert np.all((out >= 0) & (out < 2 * math.pi))


def test_coarse_label_examples():
    assert coarse_label(PhasePoint(math.pi / 2, 0.0)) == "L"
    assert coarse_label(PhasePoint(3 * math.pi / 2, 0.0)) == "R"
    with pytest.raises(CornerAngle):
        coarse_label(PhasePoint(math.pi, 0.0))
    assert coarse_label(1.0) == "L"


def test_corner_distance():
    assert corner_distance(3 * math.pi + 0.25) == pytest.approx(0.25)
    assert corner_distance(-0.1) == pytest.approx(0.1)


def test_cylinder_projection():
    c = to_cylinder(PhasePoint(-math.pi / 2, 0.3))
    assert c.theta_mod == pytest.approx(3 * math.pi / 2)
    assert c.theta_dot == 0.3


@given(angles)
def test_wrap_is_idempotent_and_periodic(theta):
    w = wrap_theta(theta)
    assert 0.0 <= w < 2 * math.pi
    assert wrap_theta(w) == pytest.approx(w, abs=1e-12)
    shifted = wrap_theta(theta + 2 * math.pi)
    # both sides of the cut are the same point on the circle
    gap = abs(shifted - w)
    assert min(gap, 2 * math.pi - gap) < 1e-9


@given(angles.filter(lambda t: corner_distance(t) > 1e-6))
def test_coarse_label_is_2pi_periodic(theta):
    assert coarse_label(theta) == coarse_label(theta + 2 * math.pi)


@settings(max_examples=200)
@given(
    st.floats(0.01, math.pi - 0.01),
    st.floats(-40.0, 40.0),
    st.sampled_from([1e3, 1e4, 1e6]),
    st.booleans(),
)
def test_full_state_has_energy_E(theta, thd, E, right_arc):
    params = CoinParams(E=E)
    s = to_full_state(PhasePoint(theta + math.pi * right_arc, thd), params)
    assert s.y == pytest.approx(abs(math.sin(s.theta)), abs=1e-15)
    assert s.y_dot < 0
    assert energy_of(s, params) == pytest.approx(E, rel=1e-12)
