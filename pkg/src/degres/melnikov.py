"""Adjoint solutions along a cycle and the Melnikov-type functions

    M_j(theta) = int_theta^{theta+T} < z_j(tau), g(tau - theta, x0(tau), 0) > dtau,   j = A, E

where z_j solves z' = -f'(x0(t))^T z with z_A(0) = x0'(0)/|x0'(0)|^2 and
z_E(0) = (-x0'_2(0), x0'_1(0)).  If M_E has exactly two zeros on [0, T),
both strict, and M_A takes opposite signs there, the degree of -fbar over the
interior of the cycle is 0 or 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .averaging import DEFAULT_CFG, AveragingConfig, integrate_periodic
from .errors import DegenerateProfile, NoZeros, NotPeriodic
from .ode_core import (
    DEFAULT_TOL,
    AutonomousSystem,
    PerturbedSystem,
    Tolerances,
    Trajectory,
    _as_point,
    integrate,
)

__all__ = [
    "Cycle",
    "AdjointFlow",
    "MelnikovProfile",
    "CriterionResult",
    "adjoint_flow",
    "adjoint_solution",
    "melnikov_values",
    "melnikov_function",
    "melnikov_profile",
    "criterion_degree_0_or_2",
]


@dataclass(frozen=True, eq=False)
class Cycle:
    """A sampled periodic orbit of the unperturbed system.

    Time is measured from ``start``; ``cycle(t)`` evaluates x0(t mod period).
    """

    start: np.ndarray
    period: float
    samples: Trajectory = field(repr=False)
    velocity_start: np.ndarray

    @classmethod
    def from_start(cls, sys: AutonomousSystem, start, period: float,
                   tol: Tolerances = DEFAULT_TOL, closure_tol: float = 1e-8) -> "Cycle":
        start = _as_point(start)
        if not period > 0:
            raise ValueError(f"cycle period must be positive, got {period!r}")
        vel = sys.rhs(0.0, start)
        if not np.linalg.norm(vel) > 0:
            raise ValueError(f"zero velocity at {start}: an equilibrium is not a cycle")
        traj = integrate(sys, 0.0, period, start, tol)
        gap = float(np.linalg.norm(traj.y[-1] - start))
        if gap > closure_tol * (1.0 + np.linalg.norm(start)):
            raise NotPeriodic(f"orbit through {start} does not close after {period}: gap {gap:.3e}")
        return cls(start, float(period), traj, vel)

    def __call__(self, t):
        return self.samples(np.mod(t, self.period))

    def polyline(self, n: int = 512) -> np.ndarray:
        return self(self.period * np.arange(n) / n)

    @property
    def orientation(self) -> int:
        """+1 for counterclockwise traversal, -1 for clockwise."""
        p = self.polyline(256)
        q = np.roll(p, -1, axis=0)
        area = 0.5 * np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1])
        return 1 if area > 0 else -1


@dataclass(frozen=True, eq=False)
class AdjointFlow:
    """Joint integration of the cycle and both adjoint solutions over [0, horizon]."""

    cycle: Cycle
    traj: Trajectory = field(repr=False)
    horizon: float

    def z(self, which: str, tau):
        cols = _cols(which)
        return self.traj(tau)[..., cols]


def _cols(which: str) -> slice:
    if which == "A":
        return slice(2, 4)
    if which == "E":
        return slice(4, 6)
    raise ValueError(f"which must be 'A' or 'E', got {which!r}")


def _base(sys) -> AutonomousSystem:
    return sys.base if isinstance(sys, PerturbedSystem) else sys


def adjoint_flow(sys, cycle: Cycle, tol: Tolerances = DEFAULT_TOL,
                 horizon_periods: float = 2.0) -> AdjointFlow:
    v = cycle.velocity_start
    z_a = v / float(v @ v)
    z_e = np.array([-v[1], v[0]])
    horizon = horizon_periods * cycle.period
    traj = integrate(_base(sys), 0.0, horizon, np.concatenate((cycle.start, z_a, z_e)), tol,
                     kind="adjoint", ncols=2)
    return AdjointFlow(cycle, traj, horizon)


def adjoint_solution(sys, cycle: Cycle, which: str, tau: float,
                     tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """z_A(tau) or z_E(tau) for tau in [0, 2T]."""
    if not 0.0 <= tau <= 2.0 * cycle.period:
        raise ValueError(f"tau must lie in [0, 2T], got {tau}")
    return adjoint_flow(sys, cycle, tol).z(which, tau)


def melnikov_values(sys: PerturbedSystem, cycle: Cycle, which: str, thetas,
                    cfg: AveragingConfig = DEFAULT_CFG,
                    adjoint: Optional[AdjointFlow] = None) -> np.ndarray:
    """M_which at every theta in ``thetas`` (one shared quadrature)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    T = cycle.period
    if adjoint is None:
        adjoint = adjoint_flow(sys, cycle, cfg.tol)
    if thetas.size and (thetas.min() < 0 or thetas.max() + T > adjoint.horizon * (1 + 1e-12)):
        raise ValueError("theta outside the range covered by the adjoint integration")
    cols = _cols(which)

    def integrand(s):
        tau = (thetas[:, None] + s[None, :]).ravel()
        z = adjoint.traj(tau)[:, cols]  # (k*m, 2)
        x0 = cycle(tau)  # (k*m, 2)
        gv = sys.g_batch(np.broadcast_to(s, (thetas.size, s.size)).ravel(), x0.T, 0.0)
        return np.einsum("ij,ji->i", z, gv).reshape(thetas.size, s.size)

    val, _ = integrate_periodic(integrand, 0.0, T, cfg.quad_nodes, cfg.quad_tol, cfg.max_panels)
    return val


def melnikov_function(sys: PerturbedSystem, cycle: Cycle, which: str, theta: float,
                      cfg: AveragingConfig = DEFAULT_CFG,
                      adjoint: Optional[AdjointFlow] = None) -> float:
    return float(melnikov_values(sys, cycle, which, [theta], cfg, adjoint)[0])


@dataclass
class MelnikovProfile:
    period: float
    thetas: np.ndarray
    m_a: np.ndarray
    m_e: np.ndarray
    zeros_e: list[tuple[float, float]]  # (theta, slope)
    sign_product_a: float  # nan unless exactly two zeros
    m_a_at_zeros: list[float] = field(default_factory=list)
    degenerate: bool = False  # tangential zero of M_E detected
    tangential_zeros: list[float] = field(default_factory=list)

    @property
    def max_abs_e(self) -> float:
        return float(np.max(np.abs(self.m_e))) if self.m_e.size else 0.0

    @property
    def zero_count(self) -> int:
        return len(self.zeros_e)


def melnikov_profile(sys: PerturbedSystem, cycle: Cycle, n_theta: int = 128,
                     cfg: AveragingConfig = DEFAULT_CFG,
                     adjoint: Optional[AdjointFlow] = None) -> MelnikovProfile:
    if n_theta < 32:
        raise ValueError("n_theta must be >= 32")
    T = cycle.period
    if adjoint is None:
        adjoint = adjoint_flow(sys, cycle, cfg.tol)
    thetas = T * np.arange(n_theta) / n_theta
    m_a = melnikov_values(sys, cycle, "A", thetas, cfg, adjoint)
    m_e = melnikov_values(sys, cycle, "E", thetas, cfg, adjoint)
    scale = float(np.max(np.abs(m_e)))
    if scale < 1e-14:
        raise DegenerateProfile("M_E vanishes identically on the theta grid")

    def me(th):
        return melnikov_function(sys, cycle, "E", th, cfg, adjoint)

    ztol = 1e-10 * scale
    roots: list[float] = []
    tangential = []
    for k in range(n_theta):
        a, fa = thetas[k], m_e[k]
        b, fb = (thetas[k + 1], m_e[k + 1]) if k + 1 < n_theta else (T, m_e[0])
        if abs(fa) <= ztol:
            # a zero sitting on a node is simple only if the neighbours differ in sign
            if m_e[k - 1] * m_e[(k + 1) % n_theta] < 0:
                roots.append(float(a))
            else:
                tangential.append(float(a))
        elif abs(fb) > ztol and fa * fb < 0:
            roots.append(float(brentq(me, a, b, xtol=1e-14 * T, rtol=8.9e-16)))
    roots = sorted({0.0 if T - r < 1e-12 * T else r for r in roots})

    h = 1e-5 * T
    zeros = []
    for r in roots:
        lo = r - h if r - h >= 0 else r - h + T
        zeros.append((r, (me(r + h) - me(lo)) / (2 * h)))

    # tangential zeros between nodes: grid minima of |M_E| without a sign change
    absm = np.abs(m_e)
    for k in range(n_theta):
        km, kp = (k - 1) % n_theta, (k + 1) % n_theta
        if absm[k] <= absm[km] and absm[k] <= absm[kp] and m_e[km] * m_e[kp] > 0 \
                and m_e[k] * m_e[kp] > 0 and absm[k] > ztol and absm[k] < 1e-2 * scale:
            lo = thetas[k] - T / n_theta
            hi = thetas[k] + T / n_theta
            if lo < 0:
                lo, hi = lo + T, hi + T
            res = minimize_scalar(lambda th: abs(me(th)), bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12 * T})
            if res.fun <= 1e-8 * scale:
                tangential.append(float(res.x % T))

    if not zeros and not tangential:
        raise NoZeros("M_E has no zeros on [0, T)")

    m_a_zeros = [melnikov_function(sys, cycle, "A", th, cfg, adjoint) for th, _ in zeros]
    sign_product = m_a_zeros[0] * m_a_zeros[1] if len(zeros) == 2 else math.nan
    return MelnikovProfile(T, thetas, m_a, m_e, zeros, sign_product, m_a_zeros,
                           bool(tangential), tangential)


@dataclass(frozen=True)
class CriterionResult:
    applies: bool
    conclusion: Optional[str]
    reason: str


def criterion_degree_0_or_2(profile: MelnikovProfile) -> CriterionResult:
    """Two strict zeros of M_E with M_A of opposite signs there => degree in {0, 2}."""
    if profile.degenerate:
        return CriterionResult(False, None, "tangential zero of M_E")
    if profile.zero_count != 2:
        return CriterionResult(False, None, f"M_E has {profile.zero_count} zeros, need exactly 2")
    slope_floor = 1e-6 * profile.max_abs_e / profile.period
    if any(abs(s) <= slope_floor for _, s in profile.zeros_e):
        return CriterionResult(False, None, "M_E is not strictly monotone at a zero")
    if not profile.sign_product_a < 0:
        return CriterionResult(False, None,
                               f"M_A(theta1)*M_A(theta2) = {profile.sign_product_a:.6g} is not negative")
    return CriterionResult(True, "d in {0,2}", "criterion satisfied")
