"""First-order averaging function of a periodically forced planar system.

    fbar(v) = int_0^T  Omega'_x(0, tau, Omega(tau, 0, v)) g(tau, Omega(tau, 0, v), 0) dtau

The returned value is the integral itself, not the mean (no 1/T factor);
:func:`averaging_mean` gives the normalised form.  Zeros and Poincare
indices are unaffected by the positive factor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import SingularVariational
from .ode_core import DEFAULT_TOL, PerturbedSystem, Tolerances, _as_point, variational_trajectory

__all__ = [
    "AveragingConfig",
    "AveragingGrid",
    "simpson",
    "integrate_periodic",
    "averaging_function",
    "averaging_mean",
    "averaging_on_grid",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AveragingConfig:
    quad_nodes: int = 16
    tol: Tolerances = DEFAULT_TOL
    quad_tol: float = 1e-9
    max_panels: int = 2**14

    def __post_init__(self):
        if self.quad_nodes < 16 or self.quad_nodes % 2:
            raise ValueError(f"quad_nodes must be an even integer >= 16, got {self.quad_nodes}")


DEFAULT_CFG = AveragingConfig()


def simpson(values: np.ndarray, a: float, b: float) -> np.ndarray:
    """Composite Simpson rule over the last axis (odd number of equispaced samples)."""
    n = values.shape[-1] - 1
    if n < 2 or n % 2:
        raise ValueError("Simpson needs an even number of panels")
    h = (b - a) / n
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return (h / 3.0) * (values @ w)


def integrate_periodic(integrand: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                       n0: int = 16, tol: float = 1e-9, max_panels: int = 2**14):
    """Simpson quadrature with panel doubling until successive values agree.

    ``integrand`` maps an array of nodes (m,) to values of shape (..., m).
    Returns ``(value, panels)``.
    """
    n = n0
    nodes = np.linspace(a, b, n + 1)
    vals = integrand(nodes)
    prev = simpson(vals, a, b)
    while n < max_panels:
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        mid_vals = integrand(mids)
        merged = np.empty(vals.shape[:-1] + (2 * n + 1,))
        merged[..., 0::2] = vals
        merged[..., 1::2] = mid_vals
        nodes = np.linspace(a, b, 2 * n + 1)
        vals, n = merged, 2 * n
        cur = simpson(vals, a, b)
        if np.max(np.abs(cur - prev)) < tol * max(1.0, float(np.max(np.abs(cur)))):
            return cur, n
        prev = cur
    log.warning("Simpson quadrature hit the panel limit (%d) before converging", max_panels)
    return prev, n


def _averaging_integrand(sys: PerturbedSystem, traj):
    def integrand(ts):
        states = traj(ts)  # (m, 6)
        x = states[:, :2]
        Y = states[:, 2:].reshape(-1, 2, 2)
        det = Y[:, 0, 0] * Y[:, 1, 1] - Y[:, 0, 1] * Y[:, 1, 0]
        bad = np.abs(det) < 1e-12
        if np.any(bad):
            k = int(np.argmax(bad))
            raise SingularVariational(f"|det Omega'_x| = {abs(det[k]):.3e} at tau={ts[k]:.6g}")
        gv = sys.g_batch(ts, x.T, 0.0)  # (2, m)
        # Y^{-1} g via the 2x2 adjugate
        out = np.empty_like(gv)
        out[0] = (Y[:, 1, 1] * gv[0] - Y[:, 0, 1] * gv[1]) / det
        out[1] = (-Y[:, 1, 0] * gv[0] + Y[:, 0, 0] * gv[1]) / det
        return out

    return integrand


def averaging_function(sys: PerturbedSystem, v, cfg: AveragingConfig = DEFAULT_CFG) -> np.ndarray:
    """Averaging function at ``v`` (integral form, shape (2,))."""
    v = _as_point(v)
    traj = variational_trajectory(sys.base, 0.0, sys.T, v, cfg.tol)
    val, _ = integrate_periodic(_averaging_integrand(sys, traj), 0.0, sys.T,
                                cfg.quad_nodes, cfg.quad_tol, cfg.max_panels)
    return val


def averaging_mean(sys: PerturbedSystem, v, cfg: AveragingConfig = DEFAULT_CFG) -> np.ndarray:
    """Averaging function divided by the period."""
    return averaging_function(sys, v, cfg) / sys.T


@dataclass(frozen=True)
class AveragingGrid:
    v1: np.ndarray  # (n,)
    v2: np.ndarray  # (n,)
    values: np.ndarray  # (n, n, 2); values[i, j] = fbar(v1[i], v2[j])

    def rows(self):
        for i, a in enumerate(self.v1):
            for j, b in enumerate(self.v2):
                yield a, b, self.values[i, j, 0], self.values[i, j, 1]


def averaging_on_grid(sys: PerturbedSystem, region: Sequence[float], n: int,
                      cfg: AveragingConfig = DEFAULT_CFG) -> AveragingGrid:
    x1a, x1b, x2a, x2b = map(float, region)
    v1 = np.linspace(x1a, x1b, n)
    v2 = np.linspace(x2a, x2b, n)
    cache: dict[tuple[float, float], np.ndarray] = {}
    values = np.empty((n, n, 2))
    for i, a in enumerate(v1):
        for j, b in enumerate(v2):
            key = (float(a), float(b))
            if key not in cache:
                cache[key] = averaging_function(sys, key, cfg)
            values[i, j] = cache[key]
    return AveragingGrid(v1, v2, values)
