import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degres.degree import (
    CheckConfig,
    ClosedCurve,
    check_theorem1,
    check_theorem2,
    degree_over_cycle,
    poincare_index,
    winding_number,
)
from degres.errors import RefinementExhausted, ZeroOnBoundary
from degres.melnikov import Cycle
from degres.ode_core import PerturbedSystem
from degres.systems import DuffingParams, make_duffing, make_harmonic

from conftest import SQRT2

UNIT = ClosedCurve.circle((0.0, 0.0), 1.0)


def identity(v):
    return np.asarray(v, dtype=float)


def square(v):
    return np.array([v[0] ** 2 - v[1] ** 2, 2 * v[0] * v[1]])


def two_zeros(v):
    return np.array([v[0] ** 2 - 1.0, v[1]])


@pytest.mark.parametrize("field,expected", [
    (identity, 1),
    (lambda v: np.array([v[0], -v[1]]), -1),
    (square, 2),
    (lambda v: np.array([-v[1], v[0]]), 1),
    (lambda v: np.array([v[0] ** 3 - 3 * v[0] * v[1] ** 2, 3 * v[0] ** 2 * v[1] - v[1] ** 3]), 3),
])
def test_winding_examples(field, expected):
    rep = winding_number(field, UNIT)
    assert rep.value == expected
    assert rep.max_angle_step < math.pi / 2 and rep.min_field_norm > 0


def test_index_of_duffing_closed_form():
    rep = poincare_index(lambda v: -np.array([v[1], -v[0] ** 3 - v[1]]), (0.0, 0.0), 0.5)
    assert rep.value == 1


def test_index_of_constant_field():
    assert poincare_index(lambda v: np.array([1.0, 0.0]), (3.0, -2.0), 0.7).value == 0


def test_index_of_minus_identity():
    assert poincare_index(lambda v: -np.asarray(v), (0.0, 0.0), 1.0).value == 1


def test_degree_over_circle_of_radius_sqrt2():
    curve = ClosedCurve.circle((0.0, 0.0), SQRT2)
    assert degree_over_cycle(identity, curve).value == 1
    # orientation of the input curve does not matter for degree_over_cycle
    assert degree_over_cycle(identity, curve.reversed()).value == 1


def test_degree_over_clockwise_cycle(ex2_p1):
    _, cyc = ex2_p1
    assert cyc.orientation == -1
    assert degree_over_cycle(identity, cyc).value == 1
    assert degree_over_cycle(lambda v: np.array([-v[1], v[0]]), cyc).value == 1


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.01, 100), negative=st.booleans())
def test_scaling_invariance(c, negative):
    k = -c if negative else c
    assert winding_number(lambda v: k * square(v), UNIT).value == 2


def test_orientation_reversal_negates():
    assert winding_number(square, UNIT.reversed()).value == -2


def test_additivity_two_zeros():
    big = ClosedCurve.circle((0.0, 0.0), 3.0)
    i_plus = poincare_index(two_zeros, (1.0, 0.0), 0.5).value
    i_minus = poincare_index(two_zeros, (-1.0, 0.0), 0.5).value
    assert (i_plus, i_minus) == (1, -1)
    assert winding_number(two_zeros, big).value == i_plus + i_minus == 0


@pytest.mark.parametrize("n", [8, 16, 64, 256])
def test_refinement_stability(n):
    base = winding_number(square, ClosedCurve.circle((0.2, 0.1), 1.3, n)).value
    refined = winding_number(square, ClosedCurve.circle((0.2, 0.1), 1.3, 2 * n)).value
    assert base == refined == 2


def test_zero_on_boundary():
    with pytest.raises(ZeroOnBoundary):
        winding_number(lambda v: np.array([v[0] - 1.0, v[1]]), UNIT)
    with pytest.raises(ZeroOnBoundary):
        winding_number(lambda v: np.zeros(2), UNIT)


def test_refinement_exhausted_on_tiny_level_budget():
    # z^20 on 64 nodes: every initial step is 0.625*pi and needs one bisection
    def fast(v):
        z = complex(v[0], v[1]) ** 20
        return np.array([z.real, z.imag])

    with pytest.raises(RefinementExhausted):
        winding_number(fast, UNIT, max_levels=0)
    rep = winding_number(fast, UNIT)
    assert rep.value == 20 and rep.refinement_levels == 1


def test_poincare_index_shrinks_radius_when_zero_on_circle():
    rep = poincare_index(two_zeros, (1.0, 0.0), 2.0)
    assert rep.value == 1


def test_polygon_curve_and_validation():
    sq = ClosedCurve(np.array([[0, 0], [1, 0], [2, 0], [2, 1], [2, 2], [1, 2], [0, 2], [0, 1]],
                              float) - 1.0)
    assert sq.is_ccw
    assert winding_number(identity, sq).value == 1
    with pytest.raises(ValueError):
        ClosedCurve(np.zeros((4, 2)))
    with pytest.raises(ValueError):
        ClosedCurve(np.zeros((8, 2)))
    bow = np.array([[0, 0], [1, 1], [2, 2], [2, 1], [2, 0], [1, 1], [0, 2], [0, 1]], float)
    with pytest.raises(ValueError):
        ClosedCurve(bow)


def test_theorem1_duffing_predicted():
    v = check_theorem1(make_duffing(DuffingParams(1, 1, 1, 1, 1)), (0.0, 0.0), (-1, 1, -1, 1))
    assert v.predicted
    assert v.details["index"]["value"] == 1
    d = v.to_dict()
    assert {h["name"] for h in d["hypotheses"]} == {
        "unperturbed_T_periodic_in_region", "negative_divergence", "fbar_vanishes_at_v_star",
        "index_of_minus_fbar_positive"}
    assert all(isinstance(h["evidence"], float) for h in d["hypotheses"])


def test_theorem1_negative_damping_fails_divergence():
    sys = make_duffing(DuffingParams(1, 1, -1, 1, 1), strict=False)
    v = check_theorem1(sys, (0.0, 0.0), (-1, 1, -1, 1))
    assert not v.predicted
    assert "negative_divergence" in v.failing()


def test_theorem1_zero_forcing_is_inconclusive():
    base = make_duffing().base
    sys = PerturbedSystem(base, lambda t, x, eps: np.zeros(2), T=2 * math.pi, eps_max=0.1)
    v = check_theorem1(sys, (0.0, 0.0), (-1, 1, -1, 1), CheckConfig(div_grid=(2, 2, 2)))
    assert not v.predicted
    assert "index_of_minus_fbar_positive" in v.failing()
    assert v.details["index"] is None


def test_theorem2_ex2_predicted(ex2):
    p, sys, cyc = ex2
    v = check_theorem2(sys, cyc, 0.1)
    assert v.predicted
    assert v.details["degree"]["value"] in (0, 2)
    assert v.approach_side == ("outside" if v.details["degree"]["value"] == 0 else "inside")


def test_theorem2_harmonic_fails_isolation():
    sys = make_harmonic()
    cyc = Cycle.from_start(sys.base, (0.0, 1.0), 2 * math.pi)
    v = check_theorem2(sys, cyc, 0.1)
    assert not v.predicted
    assert "no_T_periodic_orbits_off_cycle" in v.failing()


def test_theorem2_zero_forcing_fails_degree(ex2_p2):
    sys, cyc = ex2_p2
    quiet = PerturbedSystem(sys.base, lambda t, x, eps: np.array([0.0, -eps * x[1]]), T=sys.T,
                            eps_max=0.2)
    v = check_theorem2(quiet, cyc, 0.1, CheckConfig(div_grid=(2, 3, 2)))
    assert not v.predicted
    assert "degree_of_minus_fbar_not_1" in v.failing()
