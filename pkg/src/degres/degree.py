"""Winding numbers of planar fields along closed curves, Poincare indices,
degrees over cycle interiors, and the two theorem-verdict assemblers.

A degree is certified when, after adaptive bisection of the curve parameter,
every angle increment of the field between consecutive samples is below
pi/2 and the field stays away from zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .averaging import DEFAULT_CFG, AveragingConfig, averaging_function
from .errors import DegresError, RefinementExhausted, ZeroOnBoundary
from .melnikov import Cycle
from .ode_core import PerturbedSystem, check_divergence_condition, flow

__all__ = [
    "ClosedCurve",
    "DegreeReport",
    "Hypothesis",
    "TheoremVerdict",
    "CheckConfig",
    "winding_number",
    "poincare_index",
    "degree_over_cycle",
    "check_theorem1",
    "check_theorem2",
]

log = logging.getLogger(__name__)

Field = Callable[[np.ndarray], np.ndarray]
ANGLE_BOUND = 0.5 * math.pi


def _segments_cross(p: np.ndarray) -> bool:
    """True if any two non-adjacent edges of the closed polygon ``p`` intersect."""
    a = p
    b = np.roll(p, -1, axis=0)
    n = len(p)

    def orient(o, u, w):
        return (u[..., 0] - o[..., 0]) * (w[..., 1] - o[..., 1]) - \
               (u[..., 1] - o[..., 1]) * (w[..., 0] - o[..., 0])

    A1, B1 = a[:, None, :], b[:, None, :]
    A2, B2 = a[None, :, :], b[None, :, :]
    o1 = orient(A1, B1, A2)
    o2 = orient(A1, B1, B2)
    o3 = orient(A2, B2, A1)
    o4 = orient(A2, B2, B1)
    hit = (o1 * o2 < 0) & (o3 * o4 < 0)
    i, j = np.indices((n, n))
    adjacent = (np.abs(i - j) <= 1) | (np.abs(i - j) == n - 1)
    return bool(np.any(hit & ~adjacent))


@dataclass(frozen=True, eq=False)
class ClosedCurve:
    """Closed planar curve given by vertices and an optional parametrisation.

    ``param`` maps s in [0, 1] (array) to points of shape (m, 2) with
    ``param(k/n) == vertices[k]``; without it the curve is the polygon
    through the vertices.  Refinement always inserts points on the curve.
    """

    vertices: np.ndarray
    param: Optional[Callable[[np.ndarray], np.ndarray]] = None
    check_simple: bool = True

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", v)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 8:
            raise ValueError("a closed curve needs at least 8 planar vertices")
        if self.signed_area == 0.0:
            raise ValueError("closed curve encloses no area")
        if self.check_simple and _segments_cross(v):
            raise ValueError("closed curve is not simple")

    @classmethod
    def circle(cls, center=(0.0, 0.0), radius: float = 1.0, n: int = 64) -> "ClosedCurve":
        c = np.asarray(center, dtype=float)

        def param(s):
            ang = 2 * np.pi * np.asarray(s)
            return c + radius * np.stack((np.cos(ang), np.sin(ang)), axis=-1)

        return cls(param(np.arange(n) / n), param, check_simple=False)

    @classmethod
    def from_param(cls, param, n: int = 64, check_simple: bool = True) -> "ClosedCurve":
        return cls(param(np.arange(n) / n), param, check_simple)

    @property
    def signed_area(self) -> float:
        p = self.vertices
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    @property
    def is_ccw(self) -> bool:
        return self.signed_area > 0

    def points(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.param is not None:
            return np.asarray(self.param(s), dtype=float).reshape(-1, 2)
        n = len(self.vertices)
        u = np.mod(s, 1.0) * n
        k = np.floor(u).astype(int) % n
        w = (u - np.floor(u))[:, None]
        return (1 - w) * self.vertices[k] + w * self.vertices[(k + 1) % n]

    def reversed(self) -> "ClosedCurve":
        param = None if self.param is None else (lambda s, f=self.param: f(1.0 - np.asarray(s)))
        verts = np.concatenate((self.vertices[:1], self.vertices[:0:-1]))
        return ClosedCurve(verts, param, check_simple=False)

    def refined(self, factor: int = 2) -> "ClosedCurve":
        n = len(self.vertices) * factor
        return ClosedCurve(self.points(np.arange(n) / n), self.param or self._poly_param(),
                           check_simple=False)

    def _poly_param(self):
        verts = self.vertices
        return lambda s: ClosedCurve(verts, None, False).points(s)


@dataclass(frozen=True)
class DegreeReport:
    value: int
    refinement_levels: int
    max_angle_step: float
    min_field_norm: float
    median_field_norm: float = math.nan
    n_evaluations: int = 0


def _eval(field_fn: Field, pts: np.ndarray) -> np.ndarray:
    out = np.empty_like(pts)
    for k, p in enumerate(pts):
        out[k] = field_fn(p)
    if not np.all(np.isfinite(out)):
        raise ZeroOnBoundary("field is not finite on the curve")
    return out


def _increments(F: np.ndarray) -> np.ndarray:
    G = np.roll(F, -1, axis=0)
    cross = F[:, 0] * G[:, 1] - F[:, 1] * G[:, 0]
    dot = np.sum(F * G, axis=1)
    return np.arctan2(cross, dot)


def winding_number(field_fn: Field, curve: ClosedCurve, max_levels: int = 20,
                   zero_rel: float = 1e-10) -> DegreeReport:
    """Number of turns of ``field_fn`` along ``curve`` in its own traversal direction."""
    s = np.arange(len(curve.vertices)) / len(curve.vertices)
    F = _eval(field_fn, curve.vertices)
    n_evals = len(s)
    norms = np.linalg.norm(F, axis=1)
    median = float(np.median(norms))
    threshold = zero_rel * median
    if median == 0.0 or norms.min() <= threshold:
        raise ZeroOnBoundary(f"field vanishes on the curve (min |F| = {norms.min():.3e})")
    depth = np.zeros(len(s), dtype=int)  # depth of the segment starting at s[k]

    while True:
        inc = _increments(F)
        bad = np.abs(inc) >= ANGLE_BOUND
        if not bad.any():
            break
        if depth[bad].max() >= max_levels:
            raise RefinementExhausted(f"angle steps still >= pi/2 after {max_levels} bisections")
        idx = np.flatnonzero(bad)
        s_next = np.append(s[1:], 1.0)
        mids = 0.5 * (s[idx] + s_next[idx])
        Fm = _eval(field_fn, curve.points(mids))
        n_evals += len(mids)
        nm = np.linalg.norm(Fm, axis=1)
        if nm.min() <= threshold:
            raise ZeroOnBoundary(f"field vanishes on the curve (|F| = {nm.min():.3e})")
        depth[idx] += 1
        s = np.insert(s, idx + 1, mids)
        F = np.insert(F, idx + 1, Fm, axis=0)
        depth = np.insert(depth, idx + 1, depth[idx])

    total = float(np.sum(inc)) / (2 * math.pi)
    value = int(round(total))
    norms = np.linalg.norm(F, axis=1)
    return DegreeReport(value, int(depth.max()), float(np.max(np.abs(inc))), float(norms.min()),
                        median, n_evals)


def poincare_index(field_fn: Field, v0, radius: float, n: int = 64,
                   max_shrink: int = 10) -> DegreeReport:
    """Winding number of ``field_fn`` on a counterclockwise circle around ``v0``."""
    r = float(radius)
    for attempt in range(max_shrink + 1):
        try:
            return winding_number(field_fn, ClosedCurve.circle(v0, r, n))
        except ZeroOnBoundary:
            if attempt == max_shrink:
                raise
            log.info("zero on circle of radius %g around %s; halving", r, v0)
            r *= 0.5
    raise AssertionError("unreachable")


def _cycle_curve(cycle: Cycle, n: int) -> ClosedCurve:
    sign = cycle.orientation

    def param(s):
        s = np.asarray(s, dtype=float)
        return cycle(cycle.period * (s if sign > 0 else -s))

    return ClosedCurve.from_param(param, n)


def degree_over_cycle(field_fn: Field, cycle, n: int = 64) -> DegreeReport:
    """Degree of ``field_fn`` on the interior of ``cycle`` (boundary taken counterclockwise).

    ``cycle`` is a :class:`Cycle` or a :class:`ClosedCurve`.
    """
    if isinstance(cycle, Cycle):
        curve = _cycle_curve(cycle, n)
    else:
        curve = cycle if cycle.is_ccw else cycle.reversed()
    return winding_number(field_fn, curve)


@dataclass(frozen=True)
class Hypothesis:
    name: str
    holds: bool
    evidence: float
    note: str = ""


@dataclass
class TheoremVerdict:
    theorem: str  # "T1" or "T2"
    hypotheses: list[Hypothesis]
    approach_side: Optional[str] = None
    details: dict = field(default_factory=dict)

    @property
    def conclusion(self) -> str:
        if all(h.holds for h in self.hypotheses):
            return "stable_periodic_solution_predicted"
        return "inconclusive"

    @property
    def predicted(self) -> bool:
        return self.conclusion == "stable_periodic_solution_predicted"

    def failing(self) -> list[str]:
        return [h.name for h in self.hypotheses if not h.holds]

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "conclusion": self.conclusion,
            "approach_side": self.approach_side,
            "hypotheses": [asdict(h) for h in self.hypotheses],
            "details": self.details,
        }


@dataclass(frozen=True)
class CheckConfig:
    averaging: AveragingConfig = DEFAULT_CFG
    periodic_grid: int = 5
    periodic_tol: float = 1e-6
    div_grid: tuple[int, int, int] = (8, 9, 5)
    eps_low: float = 0.0
    index_radius: Optional[float] = None
    curve_nodes: int = 64
    annulus_samples: int = 16


DEFAULT_CHECK = CheckConfig()


def _minus_fbar(sys: PerturbedSystem, cfg: AveragingConfig) -> Field:
    return lambda v: -averaging_function(sys, v, cfg)


def _guarded(name: str, fn) -> tuple[Optional[DegreeReport], str]:
    try:
        return fn(), ""
    except DegresError as exc:
        log.info("%s failed: %s", name, exc)
        return None, f"{type(exc).__name__}: {exc}"


def check_theorem1(sys: PerturbedSystem, v_star, region: Sequence[float],
                   cfg: CheckConfig = DEFAULT_CHECK) -> TheoremVerdict:
    """Assemble the sampled hypotheses for a stable resonance near ``v_star``."""
    v_star = np.asarray(v_star, dtype=float)
    x1a, x1b, x2a, x2b = map(float, region)
    tol = cfg.averaging.tol
    hyps = []

    worst = 0.0
    for a in np.linspace(x1a, x1b, cfg.periodic_grid):
        for b in np.linspace(x2a, x2b, cfg.periodic_grid):
            v = np.array([a, b])
            gap = np.linalg.norm(flow(sys.base, sys.T, 0.0, v, tol) - v) / (1 + np.linalg.norm(v))
            worst = max(worst, float(gap))
    hyps.append(Hypothesis("unperturbed_T_periodic_in_region", worst <= cfg.periodic_tol, worst,
                           "max |Omega(T,0,v)-v|/(1+|v|) on grid"))

    cert = check_divergence_condition(sys, region, (cfg.eps_low, sys.eps_max), cfg.div_grid)
    hyps.append(Hypothesis("negative_divergence", cert.holds, cert.max_value,
                           f"max sampled divergence at (t,x1,x2,eps)={cert.argmax}"))

    radius = cfg.index_radius or 0.25 * min(x1b - x1a, x2b - x2a)
    minus_fbar = _minus_fbar(sys, cfg.averaging)
    report, err = _guarded("index", lambda: poincare_index(minus_fbar, v_star, radius,
                                                           cfg.curve_nodes))
    fbar_star = averaging_function(sys, v_star, cfg.averaging)
    size = float(np.linalg.norm(fbar_star))
    median = report.median_field_norm if report else 0.0
    rel = size / median if median > 0 else (0.0 if size == 0.0 else math.inf)
    hyps.append(Hypothesis("fbar_vanishes_at_v_star", size <= 1e-7 * median or size == 0.0, rel,
                           "|fbar(v*)| / median |fbar| on the index circle"))
    if report is None:
        hyps.append(Hypothesis("index_of_minus_fbar_positive", False, math.nan, err))
    else:
        hyps.append(Hypothesis("index_of_minus_fbar_positive", report.value > 0,
                               float(report.value),
                               f"max angle step {report.max_angle_step:.3g} rad"))
    details = {"v_star": v_star.tolist(), "fbar_integral": fbar_star.tolist(),
               "fbar_mean": (fbar_star / sys.T).tolist(), "index_radius": radius,
               "index": None if report is None else asdict(report)}
    return TheoremVerdict("T1", hyps, None, details)


def check_theorem2(sys: PerturbedSystem, cycle: Cycle, annulus_width: float,
                   cfg: CheckConfig = DEFAULT_CHECK) -> TheoremVerdict:
    """Assemble the sampled hypotheses for a stable resonance bifurcating from ``cycle``."""
    tol = cfg.averaging.tol
    hyps = []
    dT = abs(cycle.period - sys.T)
    hyps.append(Hypothesis("cycle_period_equals_T", dT <= 1e-6, dT, "|period - T|"))

    m = cfg.annulus_samples
    ts = cycle.period * np.arange(m) / m
    pts = cycle(ts)
    vel = np.array([sys.base.rhs(0.0, p) for p in pts])
    normals = np.stack((-vel[:, 1], vel[:, 0]), axis=1)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    threshold = 10 * cfg.periodic_tol
    closest = math.inf
    for off in (-annulus_width, -0.5 * annulus_width, 0.5 * annulus_width, annulus_width):
        for p, nv in zip(pts, normals):
            v = p + off * nv
            gap = np.linalg.norm(flow(sys.base, sys.T, 0.0, v, tol) - v) / (1 + np.linalg.norm(v))
            closest = min(closest, float(gap))
    hyps.append(Hypothesis("no_T_periodic_orbits_off_cycle", closest > threshold, closest,
                           "min |Omega(T,0,v)-v|/(1+|v|) on inner/outer annuli"))

    poly = cycle.polyline(256)
    lo, hi = poly.min(axis=0) - annulus_width, poly.max(axis=0) + annulus_width
    region = (lo[0], hi[0], lo[1], hi[1])
    cert = check_divergence_condition(sys, region, (cfg.eps_low, sys.eps_max), cfg.div_grid)
    hyps.append(Hypothesis("negative_divergence", cert.holds, cert.max_value,
                           f"max sampled divergence at (t,x1,x2,eps)={cert.argmax}"))

    report, err = _guarded("degree", lambda: degree_over_cycle(
        _minus_fbar(sys, cfg.averaging), cycle, cfg.curve_nodes))
    side = None
    if report is None:
        hyps.append(Hypothesis("degree_of_minus_fbar_not_1", False, math.nan, err))
    else:
        hyps.append(Hypothesis("degree_of_minus_fbar_not_1", report.value != 1,
                               float(report.value),
                               f"max angle step {report.max_angle_step:.3g} rad"))
        if report.value > 1:
            side = "inside"
        elif report.value < 1:
            side = "outside"
    details = {"cycle_start": cycle.start.tolist(), "cycle_period": cycle.period,
               "annulus_width": annulus_width,
               "degree": None if report is None else asdict(report)}
    return TheoremVerdict("T2", hyps, side, details)
