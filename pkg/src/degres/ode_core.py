"""Planar flows, variational/adjoint flows, divergence and monodromy.

Everything here is built on scipy's Dormand-Prince 5(4) pair (``RK45``) with
dense output.  Systems are plain frozen dataclasses holding callbacks; both
:class:`AutonomousSystem` and :class:`FrozenSystem` (a perturbed system at a
fixed epsilon) expose ``rhs(t, x)`` and ``jac(t, x)`` so the integration
helpers never need to know which one they were handed.
"""
from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError, NonFiniteField, NotPeriodic, StepSizeUnderflow

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "AutonomousSystem",
    "PerturbedSystem",
    "FrozenSystem",
    "Trajectory",
    "DivergenceCertificate",
    "integrate",
    "flow",
    "flow_and_variational",
    "variational_matrix",
    "variational_trajectory",
    "divergence",
    "check_divergence_condition",
    "monodromy_eigenvalues",
    "eig2",
    "fd_jacobian",
]

log = logging.getLogger(__name__)

METHOD = "RK45"

Vec = np.ndarray
Region = Sequence[float]  # (x1_min, x1_max, x2_min, x2_max)


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_step: float = np.inf
    fd_step: float = 1e-6

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "max_step", "fd_step"):
            val = getattr(self, name)
            if not (val > 0):
                raise ValueError(f"Tolerances.{name} must be positive, got {val!r}")


DEFAULT_TOL = Tolerances()


def _as_point(v) -> Vec:
    x = np.asarray(v, dtype=float).reshape(2)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite planar point {v!r}")
    return x


def fd_jacobian(fun: Callable[[Vec], Vec], x: Vec, fd_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``fun`` at ``x`` with step fd_step*(1+|x|)."""
    x = np.asarray(x, dtype=float)
    h = fd_step * (1.0 + np.linalg.norm(x))
    J = np.empty((x.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (np.asarray(fun(x + e), float) - np.asarray(fun(x - e), float)) / (2 * h)
    return J


@dataclass(frozen=True)
class AutonomousSystem:
    """Unperturbed planar field ``x' = f(x)``.

    ``jac_f`` and ``div_f`` are optional analytic derivatives; when ``jac_f``
    is missing a central-difference Jacobian is used.
    """

    f: Callable[[Vec], Vec]
    jac_f: Optional[Callable[[Vec], np.ndarray]] = None
    div_f: Optional[Callable[[Vec], float]] = None
    name: str = ""
    fd_step: float = 1e-6

    def rhs(self, t: float, x: Vec) -> Vec:
        return np.asarray(self.f(x), dtype=float)

    def jac(self, t: float, x: Vec) -> np.ndarray:
        if self.jac_f is not None:
            return np.asarray(self.jac_f(x), dtype=float)
        return fd_jacobian(self.f, x, self.fd_step)

    def div(self, x: Vec) -> float:
        if self.div_f is not None:
            return float(self.div_f(x))
        return float(np.trace(self.jac(0.0, x)))


@dataclass(frozen=True)
class PerturbedSystem:
    """Periodically forced planar system ``x' = f(x) + eps*g(t, x, eps)``.

    ``g`` must be ``T``-periodic in ``t``.  When ``vectorized`` is true,
    ``g`` accepts an array of times of shape ``(n,)`` together with states of
    shape ``(2, n)`` and returns shape ``(2, n)``; batch quadratures then
    avoid a Python loop.
    """

    base: AutonomousSystem
    g: Callable[[float, Vec, float], Vec]
    T: float
    eps_max: float
    jac_g: Optional[Callable[[float, Vec, float], np.ndarray]] = None
    vectorized: bool = False
    name: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"forcing period must be positive, got {self.T!r}")
        if not self.eps_max > 0:
            raise ValueError(f"eps_max must be positive, got {self.eps_max!r}")

    def at(self, eps: float) -> "FrozenSystem":
        return FrozenSystem(self, float(eps))

    def g_jac(self, t: float, x: Vec, eps: float) -> np.ndarray:
        if self.jac_g is not None:
            return np.asarray(self.jac_g(t, x, eps), dtype=float)
        return fd_jacobian(lambda y: self.g(t, y, eps), x, self.base.fd_step)

    def g_batch(self, ts: np.ndarray, xs: np.ndarray, eps: float) -> np.ndarray:
        """Evaluate g at times ``ts`` (n,) and states ``xs`` (2, n)."""
        if self.vectorized:
            return np.asarray(self.g(ts, xs, eps), dtype=float).reshape(2, -1)
        out = np.empty((2, ts.size))
        for k in range(ts.size):
            out[:, k] = self.g(ts[k], xs[:, k], eps)
        return out

    def periodicity_defect(self, n: int = 16, seed: int = 0, radius: float = 2.0) -> float:
        """Largest |g(t+T,x,eps) - g(t,x,eps)| over random samples."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n):
            t = rng.uniform(0, self.T)
            x = rng.uniform(-radius, radius, size=2)
            eps = rng.uniform(0, self.eps_max)
            d = np.asarray(self.g(t + self.T, x, eps)) - np.asarray(self.g(t, x, eps))
            worst = max(worst, float(np.max(np.abs(d))))
        return worst


@dataclass(frozen=True)
class FrozenSystem:
    """A :class:`PerturbedSystem` evaluated at one fixed epsilon."""

    parent: PerturbedSystem
    eps: float

    @property
    def T(self) -> float:
        return self.parent.T

    def rhs(self, t: float, x: Vec) -> Vec:
        out = self.parent.base.rhs(t, x)
        if self.eps != 0.0:
            out = out + self.eps * np.asarray(self.parent.g(t, x, self.eps), dtype=float)
        return out

    def jac(self, t: float, x: Vec) -> np.ndarray:
        J = self.parent.base.jac(t, x)
        if self.eps != 0.0:
            J = J + self.eps * self.parent.g_jac(t, x, self.eps)
        return J


System = Union[AutonomousSystem, FrozenSystem]


@dataclass
class Trajectory:
    """Integrated trajectory with dense output.

    ``t`` is stored in increasing order even for backward integrations; the
    dense interpolant is valid on ``[t.min(), t.max()]``.
    """

    t: np.ndarray
    y: np.ndarray  # shape (n, dim)
    sol: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t):
        out = self.sol(t)
        return out.T if np.ndim(t) else out

    @property
    def points(self) -> np.ndarray:
        return self.y[:, :2]

    @property
    def span(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])


def _checked(fun):
    def wrapped(t, y):
        dy = fun(t, y)
        if not np.all(np.isfinite(dy)):
            raise NonFiniteField(f"field returned non-finite value at t={t!r}, y={y!r}")
        return dy

    return wrapped


def _state_rhs(sys: System):
    return sys.rhs


def _variational_rhs(sys: System):
    def fun(t, y):
        x = y[:2]
        J = sys.jac(t, x)
        Y = y[2:].reshape(2, 2)
        return np.concatenate((sys.rhs(t, x), (J @ Y).ravel()))

    return fun


def _adjoint_rhs(sys: System, ncols: int):
    # z' = -J(x)^T z for each of ``ncols`` adjoint vectors, stacked after x
    def fun(t, y):
        x = y[:2]
        J = sys.jac(t, x)
        Z = y[2:].reshape(ncols, 2)
        return np.concatenate((sys.rhs(t, x), (-(Z @ J)).ravel()))

    return fun


def _solve(fun, t0: float, t1: float, y0: np.ndarray, tol: Tolerances, dense: bool):
    sol = solve_ivp(
        _checked(fun),
        (t0, t1),
        y0,
        method=METHOD,
        rtol=tol.rel_tol,
        atol=tol.abs_tol,
        max_step=tol.max_step,
        dense_output=dense,
    )
    if sol.status < 0:
        if "step size" in sol.message:
            raise StepSizeUnderflow(f"integration from t={t0} to t={t1} failed: {sol.message}")
        raise IntegrationError(sol.message)
    if not np.all(np.isfinite(sol.y)):
        raise NonFiniteField("trajectory became non-finite")
    return sol


def integrate(sys: System, t0: float, t1: float, y0, tol: Tolerances = DEFAULT_TOL,
              kind: str = "state", ncols: int = 1) -> Trajectory:
    """Integrate and return a dense :class:`Trajectory`.

    ``kind`` selects the augmented system: ``"state"`` (dim 2),
    ``"variational"`` (x plus the row-major 2x2 fundamental matrix, dim 6)
    or ``"adjoint"`` (x plus ``ncols`` adjoint vectors).
    """
    y0 = np.asarray(y0, dtype=float)
    if kind == "state":
        fun = _state_rhs(sys)
    elif kind == "variational":
        fun = _variational_rhs(sys)
    elif kind == "adjoint":
        fun = _adjoint_rhs(sys, ncols)
    else:
        raise ValueError(f"unknown integration kind {kind!r}")
    if t1 == t0:
        const = y0.copy()
        return Trajectory(np.array([t0]), const[None, :],
                          lambda t: np.multiply.outer(const, np.ones(np.shape(t))))
    sol = _solve(fun, t0, t1, y0, tol, dense=True)
    t, y = sol.t, sol.y.T
    if t1 < t0:
        t, y = t[::-1], y[::-1]
    return Trajectory(t.copy(), y.copy(), sol.sol)


def flow(sys: System, t: float, t0: float, v, tol: Tolerances = DEFAULT_TOL) -> Vec:
    """Omega(t, t0, v): the state at time ``t`` of the solution through ``v`` at ``t0``."""
    v = _as_point(v)
    if t == t0:
        return v.copy()
    sol = _solve(_state_rhs(sys), t0, t, v, tol, dense=False)
    return sol.y[:, -1].copy()


def flow_and_variational(sys: System, t: float, t0: float, v,
                         tol: Tolerances = DEFAULT_TOL) -> tuple[Vec, np.ndarray]:
    v = _as_point(v)
    if t == t0:
        return v.copy(), np.eye(2)
    y0 = np.concatenate((v, np.eye(2).ravel()))
    sol = _solve(_variational_rhs(sys), t0, t, y0, tol, dense=False)
    yT = sol.y[:, -1]
    return yT[:2].copy(), yT[2:].reshape(2, 2).copy()


def variational_matrix(sys: System, t: float, t0: float, v,
                       tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Fundamental matrix Omega'_x(t, t0, v) of the linearisation along the flow."""
    return flow_and_variational(sys, t, t0, v, tol)[1]


def variational_trajectory(sys: System, t0: float, t1: float, v,
                           tol: Tolerances = DEFAULT_TOL) -> Trajectory:
    v = _as_point(v)
    return integrate(sys, t0, t1, np.concatenate((v, np.eye(2).ravel())), tol, kind="variational")


def divergence(sys, t: float, x, eps: float = 0.0) -> float:
    """Trace of the full right-hand-side Jacobian at (t, x, eps).

    ``sys`` may be an :class:`AutonomousSystem`, a :class:`PerturbedSystem`
    (``eps`` is used) or a :class:`FrozenSystem` (its own epsilon is used).
    """
    x = _as_point(x)
    if isinstance(sys, FrozenSystem):
        sys, eps = sys.parent, sys.eps
    if isinstance(sys, AutonomousSystem):
        val = sys.div(x)
    else:
        val = sys.base.div(x)
        if eps != 0.0:
            val += eps * float(np.trace(sys.g_jac(t, x, eps)))
    if not np.isfinite(val):
        raise NonFiniteField(f"non-finite divergence at t={t}, x={x}, eps={eps}")
    return val


@dataclass(frozen=True)
class DivergenceCertificate:
    """Grid-sampled evidence for strict negativity of the divergence.

    This is a necessary check on sampled points, not a proof.
    """

    holds: bool
    max_value: float
    argmax: tuple[float, float, float, float]  # (t, x1, x2, eps)
    n_samples: int


def _eps_grid(eps_range, ne: int) -> np.ndarray:
    lo, hi = float(eps_range[0]), float(eps_range[1])
    if hi == lo:
        return np.array([lo])
    # half-open (lo, hi]: the perturbation parameter is positive
    return lo + (hi - lo) * np.arange(1, ne + 1) / ne


def check_divergence_condition(sys, region: Region, eps_range=(0.0, None),
                               grid=(8, 9, 5)) -> DivergenceCertificate:
    """Sample the divergence over [0,T) x region x (eps_lo, eps_hi]."""
    nt, nx, ne = grid
    if min(nt, nx, ne) < 2:
        raise ValueError("grid sizes must be >= 2 per axis")
    x1a, x1b, x2a, x2b = map(float, region)
    if not (x1b > x1a and x2b > x2a):
        raise ValueError(f"degenerate region {region!r}")
    if isinstance(sys, PerturbedSystem):
        T = sys.T
        hi = sys.eps_max if eps_range[1] is None else eps_range[1]
        eps_vals = _eps_grid((eps_range[0], hi), ne)
    else:
        T = 1.0
        eps_vals = np.array([0.0])
    ts = T * np.arange(nt) / nt
    if isinstance(sys, AutonomousSystem):
        ts = ts[:1]
    xs1 = np.linspace(x1a, x1b, nx)
    xs2 = np.linspace(x2a, x2b, nx)

    best = -np.inf
    arg = (0.0, 0.0, 0.0, 0.0)
    count = 0
    for eps in eps_vals:
        for t in ts:
            for a in xs1:
                for b in xs2:
                    d = divergence(sys, t, (a, b), eps)
                    count += 1
                    if d > best:
                        best, arg = d, (float(t), float(a), float(b), float(eps))
    return DivergenceCertificate(bool(best < 0.0), float(best), arg, count)


def eig2(M: np.ndarray) -> tuple[complex, complex]:
    """Eigenvalues of a 2x2 matrix, sorted by modulus (descending)."""
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    root = cmath.sqrt(tr * tr / 4.0 - det)
    lams = [complex(tr / 2.0 + root), complex(tr / 2.0 - root)]
    lams.sort(key=abs, reverse=True)
    return lams[0], lams[1]


def monodromy_eigenvalues(sys: System, cycle_start, T: float,
                          tol: Tolerances = DEFAULT_TOL) -> tuple[complex, complex]:
    v = _as_point(cycle_start)
    xT, Y = flow_and_variational(sys, T, 0.0, v, tol)
    gap = float(np.linalg.norm(xT - v))
    if gap > 1e-6 * (1.0 + np.linalg.norm(v)):
        raise NotPeriodic(f"|flow(T)-v| = {gap:.3e} at v={v}, T={T}")
    if isinstance(sys, AutonomousSystem):
        # the flow direction is an eigenvector; deflating along it stays accurate
        # when Y is a Jordan block (period annulus with T' != 0)
        fv = sys.rhs(0.0, v)
        nf = float(fv @ fv)
        if nf > 0.0:
            lam1 = float(fv @ Y @ fv) / nf
            lams = [complex(lam1), complex(Y[0, 0] + Y[1, 1] - lam1)]
            lams.sort(key=abs, reverse=True)
            return lams[0], lams[1]
    return eig2(Y)
