"""Optimal control of a two-phase solidification model with a singular
interface-tracking cost.

The package solves the coupled temperature / phase-parameter system with
a nonlinear heat flux and Robin boundary exchange, evaluates a family of
regularized tracking costs built around a convex-duality gap, computes
exact discrete adjoint gradients, and drives a projected-gradient
optimizer with continuation in the two regularization parameters.
"""

__version__ = "0.1.0"

from .convex import (
    ConvexContext,
    Interval,
    beta,
    beta_inverse,
    beta_prime,
    fenchel_gap,
    heaviside,
    j,
    j_star,
    moreau_j,
    moreau_jprime,
    resolvent,
)
from .grids import Grid, RobinOperator, trapezoid_weights
from .state import (
    ControlSet,
    InitialData,
    ModelParams,
    NewtonError,
    StateTrajectory,
    StepFailure,
    check_admissible,
    solve_state,
)
from .adjoint import (
    AdjointPair,
    AdjointSources,
    TangentPair,
    build_sources,
    reduced_gradient,
    solve_adjoint,
    solve_tangent,
)
from .optimize import (
    BangBangReport,
    ContinuationSchedule,
    ControlProblem,
    CostReport,
    IterationRecord,
    OptimizationResult,
    bang_bang_classify,
    continuation,
    cost_J,
    cost_J_eps,
    cost_J_eps_sigma,
    fenchel_gap_integral,
    optimize,
    project_controls,
)
from .config import ConfigError, RunConfig, load_config

__all__ = [
    "__version__",
    "ConvexContext",
    "Interval",
    "beta",
    "beta_inverse",
    "beta_prime",
    "fenchel_gap",
    "heaviside",
    "j",
    "j_star",
    "moreau_j",
    "moreau_jprime",
    "resolvent",
    "Grid",
    "RobinOperator",
    "trapezoid_weights",
    "ControlSet",
    "InitialData",
    "ModelParams",
    "NewtonError",
    "StateTrajectory",
    "StepFailure",
    "check_admissible",
    "solve_state",
    "AdjointPair",
    "AdjointSources",
    "TangentPair",
    "build_sources",
    "reduced_gradient",
    "solve_adjoint",
    "solve_tangent",
    "BangBangReport",
    "ContinuationSchedule",
    "ControlProblem",
    "CostReport",
    "IterationRecord",
    "OptimizationResult",
    "bang_bang_classify",
    "continuation",
    "cost_J",
    "cost_J_eps",
    "cost_J_eps_sigma",
    "fenchel_gap_integral",
    "optimize",
    "project_controls",
    "ConfigError",
    "RunConfig",
    "load_config",
]
