import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degres.errors import AmplitudeRootNotBracketed, NoReturn, TangentialCrossing
from degres.ode_core import AutonomousSystem, flow
from degres.orbit_tools import (
    Section,
    fd_weights,
    find_cycle,
    period_derivatives,
    period_scan,
    return_time,
)
from degres.systems import DegenerateCycleParams, make_degenerate_cycle, make_harmonic

from conftest import SQRT2, linear, rotation

PI = math.pi


def ex2_base(p):
    return make_degenerate_cycle(DegenerateCycleParams(p)).base


def period_formula(alpha, p):
    return 2 * PI / (0.25 * (alpha * alpha - 2.0) ** p + 1.0)


def vertical(a):
    return (0.0, a)


def test_rotation_period():
    assert return_time(rotation(), (1.0, 0.0)) == pytest.approx(2 * PI, abs=1e-8)


def test_explicit_section():
    sec = Section((1.0, 0.0), (0.0, -1.0))
    assert return_time(rotation(), (1.0, 0.0), sec) == pytest.approx(2 * PI, abs=1e-8)
    assert return_time(rotation(), (0.0, 1.0), sec) == pytest.approx(PI / 2, abs=1e-8)


def test_ex2_degenerate_cycle_period():
    assert return_time(ex2_base(2), (0.0, SQRT2)) == pytest.approx(2 * PI, abs=1e-8)


def test_ex2_p1_at_alpha_two():
    assert return_time(ex2_base(1), (0.0, 2.0)) == pytest.approx(4 * PI / 3, abs=1e-7)


@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("alpha", [1.0, SQRT2, 2.0])
def test_period_formula(p, alpha):
    assert return_time(ex2_base(p), vertical(alpha)) == pytest.approx(period_formula(alpha, p),
                                                                      abs=1e-7)


@settings(max_examples=10, deadline=None)
@given(s=st.floats(0.0, 6.0), alpha=st.floats(0.8, 1.9))
def test_phase_independence(s, alpha):
    base = ex2_base(1)
    v = np.array([0.0, alpha])
    T0 = return_time(base, v)
    assert return_time(base, flow(base, s, 0.0, v)) == pytest.approx(T0, rel=1e-8)


def test_derivatives_at_degenerate_cycle():
    d1, d2 = period_derivatives(ex2_base(2), vertical, SQRT2, 2, 1e-3)
    assert abs(d1) < 1e-4
    assert d2 == pytest.approx(-8 * PI, rel=1e-2)


def test_derivative_p1():
    (d1,) = period_derivatives(ex2_base(1), vertical, SQRT2, 1)
    assert d1 == pytest.approx(-SQRT2 * PI, rel=1e-2)
    assert d1 == pytest.approx(-SQRT2 * PI, rel=1e-6)


def test_harmonic_is_isochronous():
    d = period_derivatives(make_harmonic().base, vertical, 0.8, 2)
    assert np.allclose(d, 0.0, atol=1e-4)


def test_richardson_ratio():
    base, a0, h = ex2_base(1), 1.2, 0.05
    est = [period_derivatives(base, vertical, a0, 2, h / 2**k, richardson=False)[1]
           for k in range(3)]
    ratio = (est[0] - est[1]) / (est[1] - est[2])
    assert 4 / 1.5 <= ratio <= 4 * 1.5


def test_fd_weights():
    assert np.allclose(fd_weights(1, 1), [-0.5, 0.0, 0.5])
    assert np.allclose(fd_weights(2, 1), [1.0, -2.0, 1.0])
    assert np.allclose(fd_weights(3, 2), [-0.5, 1.0, 0.0, -1.0, 0.5])


def test_period_scan():
    scan = period_scan(ex2_base(2), vertical, [1.0, SQRT2, 2.0], alpha0=SQRT2)
    assert np.allclose(scan.periods, [period_formula(a, 2) for a in scan.params], atol=1e-7)
    assert len(scan.derivative_estimates) == 2


def test_no_return_for_a_node():
    with pytest.raises(NoReturn):
        return_time(linear(np.diag([-1.0, -2.0])), (1.0, 1.0), t_max=20.0)


def test_tangential_crossing():
    # x1 = -(1-t)^3 crosses x1 = 0 at t = 1 with zero normal speed
    inflect = AutonomousSystem(lambda x: np.array([3.0 * x[1] ** 2, -1.0]))
    with pytest.raises(TangentialCrossing):
        return_time(inflect, (-1.0, 1.0), Section((0.0, 0.0), (1.0, 0.0)), t_max=3.0)


def test_section_validation():
    with pytest.raises(ValueError):
        Section((0.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        Section.transversal(rotation(), (0.0, 0.0))
    sec = Section((0.0, 0.0), (3.0, 4.0))
    assert np.allclose(sec.normal, (0.6, 0.8))
    assert np.allclose(sec.direction, (-0.8, 0.6))


def test_find_cycle_with_target():
    cyc = find_cycle(ex2_base(2), (0.0, 1.5), 2 * PI)
    assert np.allclose(cyc.start, (0.0, SQRT2), atol=1e-6)
    assert cyc.period == pytest.approx(2 * PI, abs=1e-8)


def test_find_cycle_with_sign_change():
    cyc = find_cycle(ex2_base(1), (0.0, 1.5), period_formula(1.6, 1))
    assert np.allclose(cyc.start, (0.0, 1.6), atol=1e-7)


def test_find_cycle_without_target():
    cyc = find_cycle(make_harmonic().base, (0.5, 0.0))
    assert cyc.period == pytest.approx(2 * PI, abs=1e-8)
    assert np.allclose(cyc.start, (0.5, 0.0))


def test_find_cycle_unreachable_period():
    with pytest.raises(AmplitudeRootNotBracketed):
        find_cycle(ex2_base(2), (0.0, 1.5), 7.0)
