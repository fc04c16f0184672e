"""Multi-marginal Schroedinger bridges over (position, velocity) phase space.

Positional marginals observed at several times are interpolated by the law
closest in relative entropy to a stochastic double integrator, computed with
cyclic Bregman (Sinkhorn-type) projections on a phase-space grid.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .bregman import SolveReport, constraint_violation, objective, solve
from .config import load_spec
from .errors import MMSBError, NotConverged, ParseError, StarvedConstraint, ValidationError
from .interpolate import Solution, marginal_at, mean_at, mean_path
from .kernel import CostMode, GibbsKernel, bridge_moments, build_gibbs, pair_cost
from .oracle import brute_force_solve, natural_cubic_spline
from .phasegrid import (
    DiscreteMeasure,
    PhaseGrid,
    PositionalMarginal,
    gaussian_marginal,
    marginal_from_samples,
    moments,
    project_x,
    read_marginal_csv,
)
from .problem import ProblemSpec

__all__ = [
    "CostMode",
    "DiscreteMeasure",
    "GibbsKernel",
    "MMSBError",
    "NotConverged",
    "ParseError",
    "PhaseGrid",
    "PositionalMarginal",
    "ProblemSpec",
    "Solution",
    "SolveReport",
    "StarvedConstraint",
    "ValidationError",
    "bridge_moments",
    "brute_force_solve",
    "build_gibbs",
    "constraint_violation",
    "gaussian_marginal",
    "load_spec",
    "marginal_at",
    "marginal_from_samples",
    "mean_at",
    "mean_path",
    "moments",
    "natural_cubic_spline",
    "objective",
    "pair_cost",
    "project_x",
    "read_marginal_csv",
    "solve",
]
