"""Return times to a transversal section, the period function and its
derivatives, and location of cycles of the unperturbed system."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

from .errors import AmplitudeRootNotBracketed, NoReturn, TangentialCrossing
from .melnikov import Cycle
from .ode_core import DEFAULT_TOL, AutonomousSystem, Tolerances, _as_point, _checked

__all__ = [
    "Section",
    "PeriodScan",
    "return_time",
    "period_derivatives",
    "fd_weights",
    "period_scan",
    "find_cycle",
]


@dataclass(frozen=True, eq=False)
class Section:
    """Line through ``anchor`` with unit ``normal``; crossings count in the +normal direction."""

    anchor: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if not norm > 0:
            raise ValueError("section normal must be nonzero")
        object.__setattr__(self, "anchor", _as_point(self.anchor))
        object.__setattr__(self, "normal", n / norm)

    @classmethod
    def transversal(cls, sys: AutonomousSystem, point) -> "Section":
        """Section through ``point`` spanned by the perpendicular of the flow there."""
        point = _as_point(point)
        vel = sys.rhs(0.0, point)
        if not np.linalg.norm(vel) > 0:
            raise ValueError(f"no transversal section at equilibrium {point}")
        return cls(point, vel)

    def distance(self, x) -> float:
        return float(np.dot(np.asarray(x) - self.anchor, self.normal))

    @property
    def direction(self) -> np.ndarray:
        """Unit vector along the section line, normal rotated by +90 degrees."""
        return np.array([-self.normal[1], self.normal[0]])


def return_time(sys: AutonomousSystem, v, section: Optional[Section] = None,
                t_max: float = 1e3, tol: Tolerances = DEFAULT_TOL) -> float:
    """First time t > 0 at which the orbit of ``v`` crosses ``section`` in the +normal direction."""
    v = _as_point(v)
    if section is None:
        section = Section.transversal(sys, v)
    solver = RK45(_checked(sys.rhs), 0.0, v, t_bound=t_max, rtol=tol.rel_tol, atol=tol.abs_tol,
                  max_step=tol.max_step)
    d_prev = section.distance(v)
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise NoReturn(f"integration failed before returning: {msg}")
        d_new = section.distance(solver.y)
        if d_prev < 0.0 <= d_new:
            dense = solver.dense_output()
            t_star = brentq(lambda t: section.distance(dense(t)), solver.t_old, solver.t,
                            xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            x_star = dense(t_star)
            speed = float(np.dot(sys.rhs(t_star, x_star), section.normal))
            if abs(speed) < 1e-8:
                raise TangentialCrossing(f"crossing at {x_star} is tangential ({speed:.3e})")
            resid = abs(section.distance(x_star))
            if resid > 1e-10:
                raise TangentialCrossing(f"crossing residual {resid:.3e} exceeds 1e-10")
            return float(t_star)
        d_prev = d_new
    raise NoReturn(f"no return to the section within t_max={t_max}")


def fd_weights(order: int, half_width: int) -> np.ndarray:
    """Central finite-difference weights on offsets -m..m for the given derivative order."""
    offs = np.arange(-half_width, half_width + 1, dtype=float)
    A = np.vander(offs, increasing=True).T
    rhs = np.zeros(len(offs))
    rhs[order] = math.factorial(order)
    return np.linalg.solve(A, rhs)


def _default_h(alpha0: float) -> float:
    return 1e-3 * (1.0 + abs(alpha0))


def period_derivatives(sys: AutonomousSystem, alpha_to_point: Callable[[float], Sequence[float]],
                       alpha0: float, max_order: int = 2, h: Optional[float] = None,
                       richardson: bool = True, tol: Tolerances = DEFAULT_TOL) -> list[float]:
    """Estimates of T'(alpha0), ..., T^(max_order)(alpha0).

    The period along the family ``alpha_to_point`` is the return time to the
    section through each point transversal to the flow.  Order-matched
    central stencils are used; with ``richardson`` the step is halved once and
    the second-order error term eliminated.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    h = _default_h(alpha0) if h is None else float(h)
    m = (max_order + 1) // 2
    cache: dict[float, float] = {}

    def T_at(alpha):
        if alpha not in cache:
            cache[alpha] = return_time(sys, alpha_to_point(alpha), tol=tol)
        return cache[alpha]

    def estimate(step):
        vals = np.array([T_at(alpha0 + j * step) for j in range(-m, m + 1)])
        out = []
        for k in range(1, max_order + 1):
            w = fd_weights(k, m)
            out.append(float(w @ vals) / step**k)
        return np.array(out)

    coarse = estimate(h)
    if not richardson:
        return coarse.tolist()
    fine = estimate(0.5 * h)
    return ((4.0 * fine - coarse) / 3.0).tolist()


@dataclass
class PeriodScan:
    params: list[float]
    periods: list[float]
    derivative_estimates: list[float]  # T', T'', ... at the scan's reference amplitude


def period_scan(sys: AutonomousSystem, alpha_to_point, alphas: Sequence[float],
                alpha0: Optional[float] = None, max_order: int = 2,
                tol: Tolerances = DEFAULT_TOL) -> PeriodScan:
    periods = [return_time(sys, alpha_to_point(a), tol=tol) for a in alphas]
    derivs = [] if alpha0 is None else period_derivatives(sys, alpha_to_point, alpha0, max_order,
                                                          tol=tol)
    return PeriodScan([float(a) for a in alphas], periods, derivs)


def find_cycle(sys: AutonomousSystem, seed, target_period: Optional[float] = None,
               tol: Tolerances = DEFAULT_TOL, scan_halfwidth: Optional[float] = None,
               n_scan: int = 17) -> Cycle:
    """Locate a periodic orbit near ``seed``.

    Without ``target_period`` the orbit through ``seed`` is returned.  With
    it, the amplitude along the transversal line through ``seed`` is adjusted
    until the return time equals the target.  Sign changes of the mismatch
    are bracketed directly; a mismatch that touches zero at a local extremum
    (the degenerate case T' = 0) is located through the root of T'.
    """
    seed = _as_point(seed)
    section = Section.transversal(sys, seed)
    if target_period is None:
        T = return_time(sys, seed, section, tol=tol)
        return Cycle.from_start(sys, seed, T, tol)

    direction = section.direction
    half = 0.25 * (1.0 + np.linalg.norm(seed)) if scan_halfwidth is None else scan_halfwidth

    def point(s):
        return seed + s * direction

    def resid(s):
        p = point(s)
        return return_time(sys, p, Section.transversal(sys, p), tol=tol) - target_period

    grid = np.linspace(-half, half, n_scan)
    r = np.array([resid(s) for s in grid])
    s_star = None
    # nearest sign change to the seed
    changes = [k for k in range(n_scan - 1) if r[k] == 0.0 or r[k] * r[k + 1] < 0]
    if changes:
        k = min(changes, key=lambda k: abs(grid[k]))
        s_star = grid[k] if r[k] == 0.0 else brentq(resid, grid[k], grid[k + 1], xtol=1e-13)
    else:
        k = int(np.argmin(np.abs(r)))
        if 0 < k < n_scan - 1 and (r[k] - r[k - 1]) * (r[k + 1] - r[k]) < 0:
            dh = 1e-3 * (grid[1] - grid[0])

            def slope(s):
                return (resid(s + dh) - resid(s - dh)) / (2 * dh)

            lo, hi = grid[k - 1], grid[k + 1]
            if slope(lo) * slope(hi) < 0:
                s_c = brentq(slope, lo, hi, xtol=1e-13)
                if abs(resid(s_c)) <= 1e-8:
                    s_star = s_c
    if s_star is None:
        raise AmplitudeRootNotBracketed(
            f"return time never reaches {target_period} on the scan around {seed} "
            f"(range {r.min() + target_period:.6g}..{r.max() + target_period:.6g})")
    start = point(s_star)
    T = return_time(sys, start, Section.transversal(sys, start), tol=tol)
    if abs(T - target_period) > 1e-8:
        raise AmplitudeRootNotBracketed(f"refined return time {T} misses {target_period}")
    return Cycle.from_start(sys, start, T, tol)
