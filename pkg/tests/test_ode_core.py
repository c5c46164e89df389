import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from degres.errors import NonFiniteField, NotPeriodic, StepSizeUnderflow
from degres.ode_core import (
    AutonomousSystem,
    Tolerances,
    check_divergence_condition,
    divergence,
    eig2,
    flow,
    integrate,
    monodromy_eigenvalues,
    variational_matrix,
    variational_trajectory,
)
from degres.systems import DegenerateCycleParams, DuffingParams, make_degenerate_cycle, make_duffing

from conftest import SQRT2, linear, rotation, van_der_pol, zero_field


def test_rotation_returns_after_full_turn():
    assert np.allclose(flow(rotation(), 2 * math.pi, 0.0, (1.0, 0.0)), (1.0, 0.0), atol=1e-8)


def test_zero_field_is_constant():
    assert np.array_equal(flow(zero_field(), 3.7, 0.0, (0.3, -0.7)), [0.3, -0.7])


def test_flow_at_initial_time_is_identity():
    v = np.array([0.2, 0.9])
    assert np.array_equal(flow(van_der_pol(), 1.5, 1.5, v), v)


def test_ex2_cycle_closes():
    base = make_degenerate_cycle(DegenerateCycleParams(2)).base
    assert np.allclose(flow(base, 2 * math.pi, 0.0, (SQRT2, 0.0)), (SQRT2, 0.0), atol=1e-8)


def test_backward_flow_inverts_forward():
    sys = van_der_pol()
    v = np.array([0.5, -1.0])
    w = flow(sys, 2.0, 0.0, v)
    assert np.allclose(flow(sys, 0.0, 2.0, w), v, atol=1e-8)


def test_variational_matrix_of_rotation():
    Y = variational_matrix(rotation(), math.pi / 2, 0.0, (0.4, 0.1))
    assert np.allclose(Y, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-9)


def test_variational_matrix_of_zero_field():
    assert np.allclose(variational_matrix(zero_field(), 2.0, 0.0, (1.0, 1.0)), np.eye(2))


def test_liouville_on_ex2_field():
    rng = np.random.default_rng(1)
    sys = make_degenerate_cycle(DegenerateCycleParams(1)).at(0.15)
    for _ in range(3):
        v = rng.uniform(-1.5, 1.5, 2)
        tr = variational_trajectory(sys, 0.0, 4.0, v)
        det = np.linalg.det(tr.y[-1, 2:].reshape(2, 2))
        expected = math.exp(quad(lambda s: divergence(sys, s, tr(s)[:2]), 0.0, 4.0)[0])
        assert det == pytest.approx(expected, rel=1e-7)


def test_liouville_with_varying_divergence():
    sys = van_der_pol()
    tr = variational_trajectory(sys, 0.0, 3.0, (0.5, -0.3))
    det = np.linalg.det(tr.y[-1, 2:].reshape(2, 2))
    integral = quad(lambda s: divergence(sys, s, tr(s)[:2]), 0.0, 3.0, limit=200)[0]
    assert det == pytest.approx(math.exp(integral), rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(t0=st.floats(0, 1), d1=st.floats(0.1, 2), d2=st.floats(0.1, 2),
       x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_semigroup(t0, d1, d2, x, y):
    sys = van_der_pol()
    v = np.array([x, y])
    t1, t2 = t0 + d1, t0 + d1 + d2
    direct = flow(sys, t2, t0, v)
    composed = flow(sys, t2, t1, flow(sys, t1, t0, v))
    assert np.linalg.norm(direct - composed) <= 1e-7 * (1 + np.linalg.norm(v))


@settings(max_examples=10, deadline=None)
@given(x=st.floats(-1.5, 1.5), y=st.floats(-1.5, 1.5))
def test_chain_rule(x, y):
    sys = make_degenerate_cycle(DegenerateCycleParams(2)).at(0.1)
    v = np.array([x, y])
    t0, t1, t2 = 0.0, 1.3, 2.9
    Y02 = variational_matrix(sys, t2, t0, v)
    Y12 = variational_matrix(sys, t2, t1, flow(sys, t1, t0, v))
    Y01 = variational_matrix(sys, t1, t0, v)
    assert np.allclose(Y02, Y12 @ Y01, atol=1e-6)


@pytest.mark.parametrize("v", [(0.3, 1.1), (-1.2, 0.4)])
def test_variational_matches_finite_differences(v):
    sys = make_duffing().at(0.1)
    h = 1e-4
    Y = variational_matrix(sys, 2.0, 0.0, v)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        col = (flow(sys, 2.0, 0.0, np.add(v, e)) - flow(sys, 2.0, 0.0, np.subtract(v, e))) / (2 * h)
        assert np.allclose(col, Y[:, i], atol=max(1e-5, 10 * h * h))


def test_fd_jacobian_fallback_matches_analytic():
    analytic = make_degenerate_cycle(DegenerateCycleParams(2)).base
    fd = AutonomousSystem(analytic.f)
    x = np.array([0.7, -1.1])
    assert np.allclose(fd.jac(0.0, x), analytic.jac(0.0, x), atol=1e-6)
    assert fd.div(x) == pytest.approx(0.0, abs=1e-6)


def test_divergence_duffing():
    sys = make_duffing(DuffingParams(1, 1, 1, 1, 1))
    assert divergence(sys, 0.4, (0.3, 2.0), 0.1) == pytest.approx(-0.1, abs=1e-15)


def test_divergence_ex2():
    sys = make_degenerate_cycle()
    assert divergence(sys, 1.0, (0.5, -0.2), 0.1) == pytest.approx(-0.01, abs=1e-15)


def test_divergence_linear_trace():
    assert divergence(linear([[0.5, 2.0], [1.0, -2.0]]), 0.0, (1.0, 1.0)) == -1.5


def test_divergence_of_frozen_system_uses_its_eps():
    sys = make_duffing()
    assert divergence(sys.at(0.05), 0.0, (0.0, 0.0)) == pytest.approx(-0.05)


def test_divergence_certificate_duffing():
    cert = check_divergence_condition(make_duffing(eps_max=0.2), (-2, 2, -2, 2), (0.0, 0.2))
    assert cert.holds
    # half-open eps grid: smallest sampled eps is 0.2/5
    assert cert.max_value == pytest.approx(-0.04)
    assert cert.argmax[3] == pytest.approx(0.04)


def test_divergence_certificate_contracting_linear():
    cert = check_divergence_condition(linear([[1.0, 0.0], [0.0, -2.0]]), (-1, 1, -1, 1))
    assert cert.holds and cert.max_value == -1.0


def test_divergence_certificate_expanding_linear():
    cert = check_divergence_condition(linear(np.eye(2)), (-1, 1, -1, 1))
    assert not cert.holds and cert.max_value == 2.0


def test_divergence_certificate_rejects_bad_input():
    with pytest.raises(ValueError):
        check_divergence_condition(linear(np.eye(2)), (1, 1, -1, 1))
    with pytest.raises(ValueError):
        check_divergence_condition(linear(np.eye(2)), (-1, 1, -1, 1), grid=(1, 4, 4))


def test_monodromy_isochronous_centre():
    lams = monodromy_eigenvalues(rotation(), (1.0, 0.0), 2 * math.pi)
    assert np.allclose(lams, (1.0, 1.0), atol=1e-9)


def test_monodromy_linear_horizon():
    lams = monodromy_eigenvalues(linear(np.diag([-1.0, -2.0])), (0.0, 0.0), 1.0)
    assert np.allclose(lams, (math.exp(-1), math.exp(-2)), atol=1e-9)


@pytest.mark.parametrize("p", [1, 2])
def test_monodromy_ex2_unit_multiplier(p):
    base = make_degenerate_cycle(DegenerateCycleParams(p)).base
    lams = monodromy_eigenvalues(base, (SQRT2, 0.0), 2 * math.pi)
    assert all(abs(abs(l) - 1.0) < 1e-6 for l in lams)
    assert min(abs(l - 1.0) for l in lams) < 1e-6


def test_monodromy_limit_cycle():
    sys = van_der_pol()
    from degres.orbit_tools import return_time
    v = flow(sys, 60.0, 0.0, (2.0, 0.0))
    T = return_time(sys, v)
    lams = monodromy_eigenvalues(sys, v, T)
    assert abs(lams[0] - 1.0) < 1e-6
    assert abs(lams[1]) < 1e-2


def test_monodromy_rejects_non_periodic_point():
    with pytest.raises(NotPeriodic):
        monodromy_eigenvalues(van_der_pol(), (0.5, 0.0), 3.0)


def test_eig2_sorted_by_modulus():
    lams = eig2(np.array([[0.1, 0.0], [0.0, -3.0]]))
    assert np.allclose(lams, (-3.0, 0.1), rtol=0, atol=1e-15)
    z = eig2(np.array([[0.0, -2.0], [2.0, 0.0]]))
    assert np.allclose(sorted(x.imag for x in z), [-2.0, 2.0])


def test_nan_field_raises():
    bad = AutonomousSystem(lambda x: np.array([np.nan, 0.0]), lambda x: np.zeros((2, 2)))
    with pytest.raises(NonFiniteField):
        flow(bad, 1.0, 0.0, (0.0, 0.0))


def test_blow_up_raises_integration_error():
    blow = AutonomousSystem(lambda x: np.array([x[0] ** 2, 0.0]))
    with pytest.raises((StepSizeUnderflow, NonFiniteField)):
        flow(blow, 2.0, 0.0, (1.0, 0.0))


def test_tolerances_validated():
    with pytest.raises(ValueError):
        Tolerances(abs_tol=0.0)


def test_trajectory_shapes():
    tr = integrate(rotation(), 0.0, 1.0, (1.0, 0.0))
    assert tr(0.5).shape == (2,)
    assert tr(np.array([0.1, 0.2, 0.3])).shape == (3, 2)
    assert tr.span == (0.0, 1.0)


def test_unknown_integration_kind():
    with pytest.raises(ValueError):
        integrate(rotation(), 0.0, 1.0, (1.0, 0.0), kind="bogus")
