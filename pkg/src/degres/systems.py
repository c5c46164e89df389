"""Built-in systems: the degenerate Duffing and degenerate-cycle examples plus
two calibration fields, all with analytic Jacobians.

Duffing factorisation
---------------------
The scaled Duffing system is

    x1' = eps*x2
    x2' = -eps*c*x2 - eps^2*a*x1 - eps*b*x1^3 + eps*gamma*cos(omega*t)

and is stored with ``f = 0`` and ``g(t, x, eps) = (x2, -c*x2 - eps*a*x1 -
b*x1^3 + gamma*cos(omega*t))``.  The ``eps^2*a`` term therefore lives in the
epsilon slot of ``g``: it is present in every perturbed flow but drops out of
``g(., ., 0)`` and hence out of the averaging function, which is
``col(v2, -b*v1^3 - c*v2)`` up to the period factor.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import InvalidParams, UnknownSystem
from .ode_core import AutonomousSystem, PerturbedSystem

__all__ = [
    "DuffingParams",
    "DegenerateCycleParams",
    "make_duffing",
    "make_degenerate_cycle",
    "make_harmonic",
    "make_linear_contract",
    "SystemEntry",
    "list_systems",
    "get_system",
    "EX2_CYCLE_START",
    "EX2_PERIOD",
]

SQRT2 = math.sqrt(2.0)
# phase convention: x0(t) = (alpha*sin, alpha*cos) at t = 0
EX2_CYCLE_START = (0.0, SQRT2)
EX2_PERIOD = 2.0 * math.pi


@dataclass(frozen=True)
class DuffingParams:
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    gamma: float = 1.0
    omega: float = 1.0


@dataclass(frozen=True)
class DegenerateCycleParams:
    p: int = 2


def _zero_field(x):
    return np.zeros(2)


def _zero_jac(x):
    return np.zeros((2, 2))


def make_duffing(params: DuffingParams = DuffingParams(), eps_max: float = 0.1,
                 strict: bool = True) -> PerturbedSystem:
    """Degenerate Duffing system in the (u, u'/eps) coordinates.

    ``strict=False`` admits non-positive a, b, c, gamma (used to build
    counter-examples such as negative damping); omega must always be positive.
    """
    a, b, c, gamma, omega = params.a, params.b, params.c, params.gamma, params.omega
    if not omega > 0:
        raise InvalidParams(f"omega must be positive, got {omega!r}")
    if strict and min(a, b, c, gamma) <= 0:
        raise InvalidParams(f"Duffing parameters must all be positive: {params}")

    def g(t, x, eps):
        x1, x2 = x[0], x[1]
        return np.array([x2, -c * x2 - eps * a * x1 - b * x1**3 + gamma * np.cos(omega * t)])

    def jac_g(t, x, eps):
        return np.array([[0.0, 1.0], [-eps * a - 3.0 * b * x[0] ** 2, -c]])

    base = AutonomousSystem(_zero_field, _zero_jac, lambda x: 0.0, name="zero")
    return PerturbedSystem(base, g, T=2.0 * math.pi / omega, eps_max=eps_max, jac_g=jac_g,
                           vectorized=True, name="duffing-ex1", params=asdict(params))


def make_degenerate_cycle(params: DegenerateCycleParams = DegenerateCycleParams(),
                          eps_max: float = 0.2) -> PerturbedSystem:
    """Rotation field with amplitude-dependent speed (1/4)(r^2-2)^p + 1.

    The unperturbed cycle of amplitude sqrt(2) has period 2*pi with the
    first p-1 derivatives of the period function vanishing.
    """
    p = params.p
    if not isinstance(p, (int, np.integer)) or isinstance(p, bool) or p < 1:
        raise InvalidParams(f"p must be a positive integer, got {p!r}")
    p = int(p)

    def f(x):
        x1, x2 = x[0], x[1]
        h = 0.25 * (x1 * x1 + x2 * x2 - 2.0) ** p + 1.0
        return np.array([x2 * h, -x1 * h])

    def jac_f(x):
        x1, x2 = x[0], x[1]
        s = x1 * x1 + x2 * x2 - 2.0
        h = 0.25 * s**p + 1.0
        k = 0.5 * p * s ** (p - 1)  # grad h = k * x
        return np.array([[k * x1 * x2, h + k * x2 * x2],
                         [-h - k * x1 * x1, -k * x1 * x2]])

    def div_f(x):
        # h depends on |x| only, so the rotational field is divergence free
        return 0.0

    def g(t, x, eps):
        x2 = x[1]
        return np.array([np.zeros_like(x2), -eps * x2 + np.sin(t)])

    def jac_g(t, x, eps):
        return np.array([[0.0, 0.0], [0.0, -eps]])

    base = AutonomousSystem(f, jac_f, div_f, name=f"degenerate-cycle-p{p}")
    return PerturbedSystem(base, g, T=EX2_PERIOD, eps_max=eps_max, jac_g=jac_g,
                           vectorized=True, name="degenerate-cycle-ex2", params={"p": p})


def make_harmonic(c: float = 1.0, gamma: float = 1.0, omega: float = 1.0,
                  eps_max: float = 0.1) -> PerturbedSystem:
    """Damped, forced harmonic oscillator; every unperturbed orbit is 2*pi-periodic."""
    if not omega > 0:
        raise InvalidParams(f"omega must be positive, got {omega!r}")
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    base = AutonomousSystem(lambda x: np.array([x[1], -x[0]]), lambda x: rot, lambda x: 0.0,
                            name="harmonic")

    def g(t, x, eps):
        x2 = x[1]
        return np.array([np.zeros_like(x2), -c * x2 + gamma * np.sin(omega * t)])

    def jac_g(t, x, eps):
        return np.array([[0.0, 0.0], [0.0, -c]])

    return PerturbedSystem(base, g, T=2.0 * math.pi / omega, eps_max=eps_max, jac_g=jac_g,
                           vectorized=True, name="harmonic",
                           params={"c": c, "gamma": gamma, "omega": omega})


def make_linear_contract(T: float = 1.0, eps_max: float = 1.0) -> PerturbedSystem:
    """x' = -eps*x: a global contraction with the origin as attractor."""
    base = AutonomousSystem(_zero_field, _zero_jac, lambda x: 0.0, name="zero")
    return PerturbedSystem(base, lambda t, x, eps: -np.asarray(x, dtype=float), T=T,
                           eps_max=eps_max, jac_g=lambda t, x, eps: -np.eye(2),
                           vectorized=True, name="linear-contract", params={"T": T})


@dataclass(frozen=True)
class SystemEntry:
    name: str
    description: str
    params: dict[str, tuple[type, Any]]  # key -> (type, default)
    build: Callable[..., PerturbedSystem]
    defaults: dict[str, Any] = field(default_factory=dict)  # scenario defaults

    def make(self, overrides: dict | None = None) -> PerturbedSystem:
        values = {k: default for k, (_, default) in self.params.items()}
        for k, v in (overrides or {}).items():
            if k not in self.params:
                raise InvalidParams(f"system {self.name!r} has no parameter {k!r}")
            typ = self.params[k][0]
            if typ is int and not float(v).is_integer():
                raise InvalidParams(f"parameter {k!r} must be an integer, got {v!r}")
            values[k] = typ(v)
        return self.build(**values)


def _build_duffing(a, b, c, gamma, omega, eps_max, strict):
    return make_duffing(DuffingParams(a, b, c, gamma, omega), eps_max=eps_max, strict=strict)


def _build_ex2(p, eps_max):
    return make_degenerate_cycle(DegenerateCycleParams(p), eps_max=eps_max)


_CATALOG: dict[str, SystemEntry] = {
    e.name: e
    for e in [
        SystemEntry(
            "duffing-ex1",
            "degenerate Duffing oscillator, f = 0, isolated averaging zero at the origin",
            {"a": (float, 1.0), "b": (float, 1.0), "c": (float, 1.0), "gamma": (float, 1.0),
             "omega": (float, 1.0), "eps_max": (float, 0.1), "strict": (bool, True)},
            _build_duffing,
            {"v_star": [0.0, 0.0], "region": [-1.0, 1.0, -1.0, 1.0],
             "eps_schedule": [0.1, 0.05, 0.025], "mode": "point"},
        ),
        SystemEntry(
            "degenerate-cycle-ex2",
            "rotation with speed (1/4)(r^2-2)^p + 1; degenerate period function at r = sqrt(2)",
            {"p": (int, 2), "eps_max": (float, 0.2)},
            _build_ex2,
            {"cycle_start": list(EX2_CYCLE_START), "target_period": EX2_PERIOD,
             "annulus_width": 0.1, "eps_schedule": [0.2, 0.1, 0.05], "mode": "cycle",
             "alphas": [1.0, 1.2, SQRT2, 1.6, 2.0], "alpha0": SQRT2,
             "region": [-2.0, 2.0, -2.0, 2.0]},
        ),
        SystemEntry(
            "harmonic",
            "damped forced harmonic oscillator (isochronous centre)",
            {"c": (float, 1.0), "gamma": (float, 1.0), "omega": (float, 1.0),
             "eps_max": (float, 0.1)},
            make_harmonic,
            {"cycle_start": [0.0, 1.0], "target_period": 2.0 * math.pi, "annulus_width": 0.1,
             "region": [-1.0, 1.0, -1.0, 1.0], "alphas": [0.5, 1.0, 1.5], "alpha0": 1.0},
        ),
        SystemEntry(
            "linear-contract",
            "x' = -eps*x, contraction to the origin",
            {"T": (float, 1.0), "eps_max": (float, 1.0)},
            make_linear_contract,
            {"v_star": [0.0, 0.0], "region": [-1.0, 1.0, -1.0, 1.0],
             "eps_schedule": [1.0, 0.5], "mode": "point"},
        ),
    ]
}


def list_systems() -> list[SystemEntry]:
    return list(_CATALOG.values())


def get_entry(name: str) -> SystemEntry:
    try:
        return _CATALOG[name]
    except KeyError:
        raise UnknownSystem(f"unknown system {name!r}; known: {sorted(_CATALOG)}") from None


def get_system(name: str, params: dict | None = None) -> PerturbedSystem:
    return get_entry(name).make(params)
