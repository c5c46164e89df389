"""Acceptance criteria, runnable from ``degres selftest`` and from pytest.

Each ``criterion_N`` returns an :class:`Outcome`; tolerances are fixed here.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .averaging import averaging_function
from .degree import ClosedCurve, check_theorem1, degree_over_cycle, poincare_index, winding_number
from .melnikov import Cycle, adjoint_flow, criterion_degree_0_or_2, melnikov_profile
from .ode_core import (
    AutonomousSystem,
    divergence,
    flow,
    integrate,
    monodromy_eigenvalues,
    variational_trajectory,
)
from .orbit_tools import period_derivatives, return_time
from .periodic_finder import attractor_probe, continuation, stroboscopic_jacobian, stroboscopic_map
from .systems import (
    EX2_CYCLE_START,
    EX2_PERIOD,
    DegenerateCycleParams,
    DuffingParams,
    make_degenerate_cycle,
    make_duffing,
)

SQRT2 = math.sqrt(2.0)
PI = math.pi


@dataclass
class Outcome:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number}: {self.title} ({self.seconds:.1f}s) :: {self.detail}"


def _ex2(p: int):
    sys = make_degenerate_cycle(DegenerateCycleParams(p))
    return sys, Cycle.from_start(sys.base, EX2_CYCLE_START, EX2_PERIOD)


def _circ_dist(a: float, b: float, T: float) -> float:
    d = abs(a - b) % T
    return min(d, T - d)


def criterion_1() -> Outcome:
    t0 = time.perf_counter()
    ok, parts = True, []
    for p in (1, 2):
        sys, cyc = _ex2(p)
        prof = melnikov_profile(sys, cyc, 128)
        th = prof.thetas
        err_a = float(np.max(np.abs(prof.m_a + PI / SQRT2 * np.cos(th))))
        err_e = float(np.max(np.abs(prof.m_e + SQRT2 * PI * np.sin(th))))
        ok &= err_a <= 1e-3 and err_e <= 1e-3
        parts.append(f"p={p}: max|M_A err|={err_a:.2e} max|M_E err|={err_e:.2e}")
    secs = time.perf_counter() - t0
    ok &= secs < 30.0
    return Outcome(1, "Melnikov closed forms, 128-point grid, tol 1e-3", bool(ok),
                   "; ".join(parts), secs)


def criterion_2() -> Outcome:
    t0 = time.perf_counter()
    ok, parts = True, []
    for p in (1, 2):
        sys, cyc = _ex2(p)
        prof = melnikov_profile(sys, cyc, 128)
        T = cyc.period
        thetas = sorted(t for t, _ in prof.zeros_e)
        zeros_ok = (len(thetas) == 2 and _circ_dist(thetas[0], 0.0, T) <= 1e-6
                    and _circ_dist(thetas[1], PI, T) <= 1e-6)
        slopes_ok = all(abs(s) > 1e-6 * prof.max_abs_e / T for _, s in prof.zeros_e)
        crit = criterion_degree_0_or_2(prof)
        deg = degree_over_cycle(lambda v: -averaging_function(sys, v), cyc)
        certified = deg.max_angle_step < PI / 2 and deg.min_field_norm > 0
        good = (zeros_ok and slopes_ok and prof.sign_product_a < 0 and crit.applies
                and deg.value in (0, 2) and certified)
        ok &= good
        parts.append(f"p={p}: zeros={[round(t, 9) for t in thetas]} "
                     f"M_A product={prof.sign_product_a:.4f} applies={crit.applies} "
                     f"degree={deg.value}")
    return Outcome(2, "M_E zeros at 0 and pi, criterion applies, degree in {0,2}", bool(ok),
                   "; ".join(parts), time.perf_counter() - t0)


def criterion_3() -> Outcome:
    t0 = time.perf_counter()
    duff = make_duffing(DuffingParams(1.0, 1.0, 1.0, 1.0, 1.0))

    def closed(v):
        return -np.array([v[1], -v[0] ** 3 - v[1]])

    r1 = poincare_index(closed, (0.0, 0.0), 0.5)
    r2 = poincare_index(lambda v: -averaging_function(duff, v), (0.0, 0.0), 0.5)
    cert = all(r.max_angle_step < PI / 2 and r.min_field_norm > 0 for r in (r1, r2))
    verdict = check_theorem1(duff, (0.0, 0.0), (-1.0, 1.0, -1.0, 1.0))
    ok = r1.value == 1 and r2.value == 1 and cert and verdict.predicted
    return Outcome(3, "Duffing index of -fbar at 0 is 1; theorem 1 predicts", bool(ok),
                   f"closed-form index={r1.value} quadrature index={r2.value} certified={cert} "
                   f"verdict={verdict.conclusion}", time.perf_counter() - t0)


def criterion_4() -> Outcome:
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_duff, worst_trace, worst_eps2 = 0.0, 0.0, 0.0
    for c in (0.5, 1.0, 2.0):
        duff = make_duffing(DuffingParams(1.0, 1.0, c, 1.0, 1.0))
        for _ in range(20):
            t, x, eps = rng.uniform(0, 2 * PI), rng.uniform(-2, 2, 2), rng.uniform(0, 0.1)
            worst_duff = max(worst_duff, abs(divergence(duff, t, x, eps) + eps * c))
    for p in (1, 2, 3):
        sys = make_degenerate_cycle(DegenerateCycleParams(p))
        for _ in range(20):
            t, x, eps = rng.uniform(0, 2 * PI), rng.uniform(-2, 2, 2), rng.uniform(0, 0.2)
            d = divergence(sys, t, x, eps)
            trace = np.trace(sys.base.jac_f(x)) + eps * np.trace(sys.jac_g(t, x, eps))
            worst_trace = max(worst_trace, abs(d - trace))
            worst_eps2 = max(worst_eps2, abs(d + eps * eps))
    ok = max(worst_duff, worst_trace, worst_eps2) <= 1e-10
    return Outcome(4, "divergence -eps*c (Duffing) and analytic trace = -eps^2 (example 2)",
                   bool(ok), f"Duffing err={worst_duff:.1e} trace err={worst_trace:.1e} "
                   f"-eps^2 err={worst_eps2:.1e}", time.perf_counter() - t0)


def criterion_5() -> Outcome:
    t0 = time.perf_counter()
    worst = 0.0
    for p in (1, 2):
        base = make_degenerate_cycle(DegenerateCycleParams(p)).base
        for a in (1.0, SQRT2, 2.0):
            exact = 2 * PI / (0.25 * (a * a - 2.0) ** p + 1.0)
            worst = max(worst, abs(return_time(base, (0.0, a)) - exact))
    base2 = make_degenerate_cycle(DegenerateCycleParams(2)).base
    d1, d2 = period_derivatives(base2, lambda a: (0.0, a), SQRT2, 2, 1e-3)
    rel2 = abs(d2 + 8 * PI) / (8 * PI)
    ok = worst <= 1e-7 and abs(d1) < 1e-4 and rel2 <= 0.01
    return Outcome(5, "period function and its derivatives at sqrt(2)", bool(ok),
                   f"max |T - formula|={worst:.1e}; p=2: T'={d1:.2e}, T''={d2:.6f} "
                   f"(-8pi={-8 * PI:.6f}, rel err {rel2:.1e})", time.perf_counter() - t0)


def criterion_6() -> Outcome:
    t0 = time.perf_counter()
    parts, ok = [], True

    duff = make_duffing(DuffingParams(1.0, 1.0, 1.0, 1.0, 1.0))
    res = continuation(duff, [0.1, 0.05, 0.025], (0.0, 0.0), "point", (0.0, 0.0))
    d = [r.dist_to_generator for r in res.rows]
    good = (not res.partial and len(res.rows) == 3
            and all(r.floquet.residual <= 1e-9 and max(r.floquet.moduli) < 1 for r in res.rows)
            and all(b < a for a, b in zip(d, d[1:])))
    ok &= good
    parts.append(f"duffing dists={[f'{x:.3e}' for x in d]} "
                 f"max|mult|={[round(max(r.floquet.moduli), 6) for r in res.rows]}")

    sys, cyc = _ex2(2)
    probe = attractor_probe(sys, 0.2, 1.1 * np.asarray(EX2_CYCLE_START), 150)
    res = continuation(sys, [0.2, 0.1, 0.05], probe.limit_point, "cycle", cyc)
    d = [r.dist_to_generator for r in res.rows]
    sides = [r.side for r in res.rows]
    deg = degree_over_cycle(lambda v: -averaging_function(sys, v), cyc)
    predicted = "inside" if deg.value > 1 else ("outside" if deg.value < 1 else None)
    good = (not res.partial and len(res.rows) == 3
            and all(r.floquet.residual <= 1e-9 and max(r.floquet.moduli) < 1 for r in res.rows)
            and all(b < a for a, b in zip(d, d[1:])) and len(set(sides)) == 1)
    ok &= good
    parts.append(f"example2 dists={[f'{x:.3e}' for x in d]} sides={sides} "
                 f"predicted={predicted} (degree {deg.value}) "
                 f"radii={[round(float(np.linalg.norm(r.fixed_point)), 4) for r in res.rows]}")
    secs = time.perf_counter() - t0
    ok &= secs < 120.0
    return Outcome(6, "numerical stable periodic solutions converge to the generator",
                   bool(ok), "; ".join(parts), secs)


def _van_der_pol(mu: float = 1.0) -> AutonomousSystem:
    return AutonomousSystem(
        lambda x: np.array([x[1], mu * (1 - x[0] ** 2) * x[1] - x[0]]),
        lambda x: np.array([[0.0, 1.0], [-2 * mu * x[0] * x[1] - 1.0, mu * (1 - x[0] ** 2)]]),
        lambda x: mu * (1 - x[0] ** 2),
        name="van-der-pol",
    )


def criterion_7() -> Outcome:
    t0 = time.perf_counter()
    parts, ok = [], True

    # Liouville
    vdp = _van_der_pol()
    worst = 0.0
    for sys_, v, tf in ((vdp, (0.5, -0.3), 3.0),
                        (make_degenerate_cycle(DegenerateCycleParams(1)).at(0.1), (0.3, 1.2), 5.0)):
        tr = variational_trajectory(sys_, 0.0, tf, v)
        Y = tr.y[-1, 2:].reshape(2, 2)
        integral = quad(lambda s: divergence(sys_, s, tr(s)[:2]), 0.0, tf, limit=200,
                        epsabs=1e-13, epsrel=1e-13)[0]
        worst = max(worst, abs(np.linalg.det(Y) / math.exp(integral) - 1.0))
    ok &= worst <= 1e-6
    parts.append(f"Liouville rel err={worst:.1e}")

    # adjoint pairing along the sheared p=1 cycle
    sys1, cyc1 = _ex2(1)
    adj = adjoint_flow(sys1, cyc1)
    var = variational_trajectory(sys1.base, 0.0, 2 * cyc1.period, cyc1.start)
    w = np.array([0.3, -0.8])
    ts = np.linspace(0.0, 2 * cyc1.period, 41)
    worst = 0.0
    for which in ("A", "E"):
        vals = [float(adj.z(which, t) @ (var(t)[2:].reshape(2, 2) @ w)) for t in ts]
        worst = max(worst, float(np.max(np.abs(np.array(vals) - vals[0]))))
    ok &= worst <= 1e-7
    parts.append(f"adjoint pairing drift={worst:.1e}")

    # degree axioms
    circle = ClosedCurve.circle((0.0, 0.0), 1.0)
    big = ClosedCurve.circle((0.0, 0.0), 3.0)
    cube = lambda v: np.array([v[0] ** 3 - 3 * v[0] * v[1] ** 2 + 0.2, 3 * v[0] ** 2 * v[1] - v[1] ** 3])
    two = lambda v: np.array([v[0] ** 2 - 1.0, v[1]])
    axioms = [
        winding_number(lambda v: 2.5 * cube(v), circle).value == winding_number(cube, circle).value,
        winding_number(lambda v: -0.7 * cube(v), circle).value == winding_number(cube, circle).value,
        winding_number(cube, circle.reversed()).value == -winding_number(cube, circle).value,
        winding_number(two, big).value
        == poincare_index(two, (1.0, 0.0), 0.5).value + poincare_index(two, (-1.0, 0.0), 0.5).value
        == 0,
    ]
    ok &= all(axioms)
    parts.append(f"degree axioms={axioms}")

    # stroboscopic Jacobian against central differences of the map
    worst = 0.0
    for sys_, eps, v in ((make_duffing(), 0.1, (0.4, -0.2)),
                         (make_degenerate_cycle(DegenerateCycleParams(2)), 0.1, (0.1, 1.5))):
        _, DP = stroboscopic_jacobian(sys_, eps, v)
        h = 1e-5
        fd = np.empty((2, 2))
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd[:, i] = (stroboscopic_map(sys_, eps, np.add(v, e))
                        - stroboscopic_map(sys_, eps, np.subtract(v, e))) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - DP))))
    ok &= worst <= 1e-5
    parts.append(f"strobe Jacobian err={worst:.1e}")

    # unit multiplier of autonomous cycles
    worst = 0.0
    for p in (1, 2):
        sys_, cyc = _ex2(p)
        lams = monodromy_eigenvalues(sys_.base, cyc.start, cyc.period)
        worst = max(worst, min(abs(l - 1.0) for l in lams))
    v_on = flow(vdp, 60.0, 0.0, (2.0, 0.0))
    T_vdp = return_time(vdp, v_on)
    lams = monodromy_eigenvalues(vdp, v_on, T_vdp)
    worst = max(worst, min(abs(l - 1.0) for l in lams))
    ok &= worst <= 1e-6
    parts.append(f"unit multiplier err={worst:.1e}")

    secs = time.perf_counter() - t0
    ok &= secs < 60.0
    return Outcome(7, "structural invariants", bool(ok), "; ".join(parts), secs)


CRITERIA: dict[int, Callable[[], Outcome]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7,
}


def run_all(printer=print) -> bool:
    results = [fn() for fn in CRITERIA.values()]
    for r in results:
        printer(r.line())
    return all(r.passed for r in results)
