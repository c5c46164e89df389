import math

import numpy as np
import pytest

from degres.melnikov import Cycle
from degres.ode_core import AutonomousSystem
from degres.systems import (
    EX2_CYCLE_START,
    EX2_PERIOD,
    DegenerateCycleParams,
    DuffingParams,
    make_degenerate_cycle,
    make_duffing,
)

SQRT2 = math.sqrt(2.0)


def rotation() -> AutonomousSystem:
    """x' = (x2, -x1), clockwise rotation with period 2*pi."""
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return AutonomousSystem(lambda x: J @ np.asarray(x), lambda x: J, lambda x: 0.0,
                            name="rotation")


def linear(A) -> AutonomousSystem:
    A = np.asarray(A, dtype=float)
    return AutonomousSystem(lambda x: A @ np.asarray(x), lambda x: A,
                            lambda x: float(np.trace(A)), name="linear")


def zero_field() -> AutonomousSystem:
    return AutonomousSystem(lambda x: np.zeros(2), lambda x: np.zeros((2, 2)), lambda x: 0.0)


def van_der_pol(mu: float = 1.0) -> AutonomousSystem:
    # analytic jacobian/divergence left out on purpose: exercises the FD fallback
    return AutonomousSystem(lambda x: np.array([x[1], mu * (1 - x[0] ** 2) * x[1] - x[0]]))


@pytest.fixture(scope="session")
def duffing():
    return make_duffing(DuffingParams(1.0, 1.0, 1.0, 1.0, 1.0))


@pytest.fixture(scope="session", params=[1, 2], ids=["p1", "p2"])
def ex2(request):
    sys = make_degenerate_cycle(DegenerateCycleParams(request.param))
    return request.param, sys, Cycle.from_start(sys.base, EX2_CYCLE_START, EX2_PERIOD)


@pytest.fixture(scope="session")
def ex2_p1():
    sys = make_degenerate_cycle(DegenerateCycleParams(1))
    return sys, Cycle.from_start(sys.base, EX2_CYCLE_START, EX2_PERIOD)


@pytest.fixture(scope="session")
def ex2_p2():
    sys = make_degenerate_cycle(DegenerateCycleParams(2))
    return sys, Cycle.from_start(sys.base, EX2_CYCLE_START, EX2_PERIOD)
