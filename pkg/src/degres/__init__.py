"""Numerical certificates for stable degenerate resonances in planar
periodically forced systems x' = f(x) + eps*g(t, x, eps)."""

__version__ = "0.1.0"

from .averaging import AveragingConfig, averaging_function, averaging_mean, averaging_on_grid
from .degree import (
    CheckConfig,
    ClosedCurve,
    DegreeReport,
    TheoremVerdict,
    check_theorem1,
    check_theorem2,
    degree_over_cycle,
    poincare_index,
    winding_number,
)
from .melnikov import (
    Cycle,
    MelnikovProfile,
    adjoint_solution,
    criterion_degree_0_or_2,
    melnikov_function,
    melnikov_profile,
)
from .ode_core import (
    AutonomousSystem,
    PerturbedSystem,
    Tolerances,
    check_divergence_condition,
    divergence,
    flow,
    monodromy_eigenvalues,
    variational_matrix,
)
from .orbit_tools import Section, find_cycle, period_derivatives, return_time
from .periodic_finder import attractor_probe, continuation, find_periodic, stroboscopic_map
from .systems import get_system, list_systems, make_degenerate_cycle, make_duffing
