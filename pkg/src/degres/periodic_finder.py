"""Stroboscopic map of the forced system, Newton shooting for T-periodic
solutions, Floquet stability, and epsilon-continuation towards the
generating solution."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegresError, NewtonDiverged, SingularJacobian
from .melnikov import Cycle
from .ode_core import (
    DEFAULT_TOL,
    PerturbedSystem,
    Tolerances,
    _as_point,
    eig2,
    flow,
    flow_and_variational,
    integrate,
)

__all__ = [
    "FloquetData",
    "ContinuationRow",
    "ContinuationResult",
    "ProbeResult",
    "stroboscopic_map",
    "stroboscopic_jacobian",
    "find_periodic",
    "continuation",
    "attractor_probe",
    "point_in_polygon",
    "set_distance",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FloquetData:
    eps: float
    fixed_point: np.ndarray
    residual: float
    multipliers: tuple[complex, complex]
    stable: bool
    iterations: int = 0

    @property
    def moduli(self) -> tuple[float, float]:
        return abs(self.multipliers[0]), abs(self.multipliers[1])


def _check_eps(sys: PerturbedSystem, eps: float):
    if not 0.0 <= eps <= sys.eps_max:
        raise ValueError(f"eps={eps} outside [0, {sys.eps_max}]")


def stroboscopic_map(sys: PerturbedSystem, eps: float, v, tol: Tolerances = DEFAULT_TOL):
    """P_eps(v): the solution at time T starting from v at time 0."""
    _check_eps(sys, eps)
    return flow(sys.at(eps), sys.T, 0.0, v, tol)


def stroboscopic_jacobian(sys: PerturbedSystem, eps: float, v, tol: Tolerances = DEFAULT_TOL):
    """(P_eps(v), DP_eps(v)) from one joint state/variational integration."""
    _check_eps(sys, eps)
    return flow_and_variational(sys.at(eps), sys.T, 0.0, v, tol)


def find_periodic(sys: PerturbedSystem, eps: float, guess, tol: Tolerances = DEFAULT_TOL,
                  max_iter: int = 50, newton_tol: float = 1e-11) -> FloquetData:
    """Newton shooting on v -> P_eps(v) - v with damped steps."""
    x = _as_point(guess)
    eye = np.eye(2)
    Px, DP = stroboscopic_jacobian(sys, eps, x, tol)
    r = Px - x
    rn = float(np.linalg.norm(r))
    it = 0
    while rn > newton_tol * (1.0 + np.linalg.norm(x)):
        if it >= max_iter:
            raise NewtonDiverged(f"no convergence in {max_iter} iterations (residual {rn:.3e})")
        A = DP - eye
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if abs(det) < 1e-12:
            raise SingularJacobian(
                f"|det(DP - I)| = {abs(det):.3e} at eps={eps}; increase eps or seed with "
                "attractor_probe")
        step = -np.linalg.solve(A, r)
        if np.linalg.norm(step) > 1e3 * (1.0 + np.linalg.norm(x)):
            raise NewtonDiverged(f"Newton step exploded to {np.linalg.norm(step):.3e}")
        lam = 1.0
        for _ in range(9):
            x_try = x + lam * step
            P_try, DP_try = stroboscopic_jacobian(sys, eps, x_try, tol)
            r_try = P_try - x_try
            if np.linalg.norm(r_try) < rn:
                break
            lam *= 0.5
        else:
            # no decrease after 8 halvings: stalled at integration noise or diverging
            if rn <= 1e-9 * (1.0 + np.linalg.norm(x)):
                break
            raise NewtonDiverged(f"damping failed to reduce residual {rn:.3e}")
        x, r, DP = x_try, r_try, DP_try
        rn = float(np.linalg.norm(r))
        it += 1

    if rn > 1e-9 * (1.0 + np.linalg.norm(x)):
        raise NewtonDiverged(f"final residual {rn:.3e} too large")
    mults = eig2(DP)
    stable = max(abs(mults[0]), abs(mults[1])) < 1.0 - 1e-9
    return FloquetData(float(eps), x, rn, mults, stable, it)


@dataclass(frozen=True)
class ProbeResult:
    converged: bool
    limit_point: np.ndarray
    steps: np.ndarray  # |v_{k+1} - v_k| over the run


def attractor_probe(sys: PerturbedSystem, eps: float, v0, n_periods: int = 200,
                    tol: Tolerances = DEFAULT_TOL) -> ProbeResult:
    """Iterate the stroboscopic map and report whether the iterates contract."""
    if n_periods < 10:
        raise ValueError("n_periods must be >= 10")
    v = _as_point(v0)
    steps = np.empty(n_periods)
    for k in range(n_periods):
        w = stroboscopic_map(sys, eps, v, tol)
        steps[k] = np.linalg.norm(w - v)
        v = w
    window = steps[-10:]
    scale = 1.0 + np.linalg.norm(v)
    if window.max() <= 1e-10 * scale:
        converged = True
    else:
        # step norms of a contracting focus oscillate; compare envelopes of two half-windows
        converged = bool(window[5:].max() < (1.0 - 1e-4) * window[:5].max())
    return ProbeResult(converged, v, steps)


def point_in_polygon(point, poly: np.ndarray) -> bool:
    """Even-odd rule."""
    x, y = float(point[0]), float(point[1])
    xs, ys = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(xs, -1), np.roll(ys, -1)
    straddle = (ys > y) != (yn > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = xs + (y - ys) * (xn - xs) / (yn - ys)
    return bool(np.count_nonzero(straddle & (x < x_cross)) % 2)


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points p (m,2) to every segment [a_k, b_k]; returns (m, n)."""
    d = b - a
    L2 = np.sum(d * d, axis=1)
    rel = p[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(rel * d[None], axis=2) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    proj = a[None] + t[..., None] * d[None]
    return np.linalg.norm(p[:, None, :] - proj, axis=2)


def set_distance(points: np.ndarray, poly: np.ndarray) -> float:
    """One-sided max-min distance from ``points`` to the closed polyline ``poly``."""
    a, b = poly, np.roll(poly, -1, axis=0)
    return float(np.max(np.min(_point_segment_distance(np.atleast_2d(points), a, b), axis=1)))


@dataclass(frozen=True)
class ContinuationRow:
    eps: float
    fixed_point: np.ndarray
    dist_to_generator: float
    side: Optional[str]
    floquet: FloquetData


@dataclass
class ContinuationResult:
    rows: list[ContinuationRow] = field(default_factory=list)
    partial: bool = False
    error: Optional[str] = None


def continuation(sys: PerturbedSystem, eps_schedule: Sequence[float], initial_guess,
                 mode: str = "point", reference: Union[Cycle, Sequence[float], None] = None,
                 tol: Tolerances = DEFAULT_TOL, orbit_samples: int = 256) -> ContinuationResult:
    """Track x_eps along a decreasing epsilon schedule with warm starts.

    ``mode="point"`` measures |x_eps(0) - reference|; ``mode="cycle"``
    measures the one-sided distance of the orbit over one period to the
    reference cycle and classifies x_eps(0) as inside or outside it.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if not eps_schedule or any(e <= 0 for e in eps_schedule) or any(
            b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps_schedule must be non-empty, positive and strictly decreasing")
    if mode not in ("point", "cycle"):
        raise ValueError(f"mode must be 'point' or 'cycle', got {mode!r}")
    if mode == "cycle":
        if not isinstance(reference, Cycle):
            raise ValueError("cycle mode needs a Cycle reference")
        poly = reference.polyline(1024)
    else:
        ref_point = np.zeros(2) if reference is None else _as_point(reference)

    out = ContinuationResult()
    guess = _as_point(initial_guess)
    for eps in eps_schedule:
        try:
            fd = find_periodic(sys, eps, guess, tol)
        except DegresError as exc:
            log.warning("continuation stopped at eps=%g: %s", eps, exc)
            out.partial, out.error = True, f"eps={eps}: {type(exc).__name__}: {exc}"
            break
        if mode == "point":
            dist, side = float(np.linalg.norm(fd.fixed_point - ref_point)), None
        else:
            traj = integrate(sys.at(eps), 0.0, sys.T, fd.fixed_point, tol)
            pts = traj(sys.T * np.arange(orbit_samples) / orbit_samples)
            dist = set_distance(pts, poly)
            side = "inside" if point_in_polygon(fd.fixed_point, poly) else "outside"
        out.rows.append(ContinuationRow(eps, fd.fixed_point, dist, side, fd))
        guess = fd.fixed_point
    return out
