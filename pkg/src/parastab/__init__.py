"""Discretized solver and verification toolbox for infinite-horizon
stabilization of semilinear heat equations under a pointwise control-norm
bound, with quadratic cost.

Layout: pde_core holds the grid, operators, norms and time stepping;
stabilization the precomputed feedback and smallness estimates; optimizer
the projected-descent solver and second-order probes; value_function the
value, its gradient and the certificate checks; oracle the reference
solvers; config, report and cli the experiment surface.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    EnumerationTooLarge,
    FitUnreliable,
    MaxIterations,
    NonlinearStepDivergence,
    NotStabilizable,
    ParastabError,
    SubproblemNonconvex,
)
from .pde_core import (
    DEFAULT_SHIFT,
    KINDS,
    AdjointTrajectory,
    ControlTrajectory,
    DiscreteOperator,
    Nonlinearity,
    ProblemSpec,
    SpatialGrid,
    StateTrajectory,
    TailFit,
    TimeGrid,
    assemble_input_map,
    assemble_operator,
    build_grid,
    build_time_grid,
    eigenmode_vector,
    gaussian_vector,
    initial_covector,
    initial_state,
    inner_y,
    interval_source_norm,
    load_binary,
    make_nonlinearity,
    make_problem,
    neg_laplacian_solve,
    node_times,
    node_weights,
    nonlinearity_apply,
    norm_at,
    norm_y,
    save_binary,
    solve_adjoint,
    solve_adjoint_generic,
    solve_linearized_state,
    solve_shifted,
    solve_state,
    tail_decay_fit,
    trajectory_norm,
)
from .stabilization import (
    FeedbackGain,
    SmallnessReport,
    build_feedback_gain,
    closed_loop_simulate,
    estimate_smallness,
    resolve_horizon,
    spectral_abscissa,
)
from .optimizer import (
    CoercivityReport,
    KktPerturbation,
    OptimalTriple,
    OptimizerConfig,
    RegularityReport,
    ResidualReport,
    coercivity_probe,
    control_inner,
    control_norm,
    hessian_vector,
    optimality_residuals,
    optimize,
    project_control,
    reduced_cost,
    reduced_gradient,
    solve_linearized_kkt,
    strong_regularity_probe,
)
from .value_function import (
    DpReport,
    GradientCheckReport,
    LipschitzReport,
    dynamic_programming_check,
    fd_gradient_check,
    feedback_consistency,
    hjb_residual,
    lipschitz_probe,
    optimal_feedback,
    value,
    value_gradient,
)
from .oracle import (
    BruteForceResult,
    FiniteHorizonLqr,
    RiccatiSolution,
    brute_force_tiny,
    finite_horizon_lqr,
    lqr_value_and_gradient,
    solve_riccati,
)
from .config import ExperimentConfig, default_config, load_config

__version__ = "0.1.0"

__all__ = [
    "AdjointTrajectory",
    "BruteForceResult",
    "CoercivityReport",
    "ConfigError",
    "ControlTrajectory",
    "DEFAULT_SHIFT",
    "DiscreteOperator",
    "DimensionMismatch",
    "DpReport",
    "EnumerationTooLarge",
    "ExperimentConfig",
    "FeedbackGain",
    "FiniteHorizonLqr",
    "FitUnreliable",
    "GradientCheckReport",
    "KINDS",
    "KktPerturbation",
    "LipschitzReport",
    "MaxIterations",
    "NonlinearStepDivergence",
    "Nonlinearity",
    "NotStabilizable",
    "OptimalTriple",
    "OptimizerConfig",
    "ParastabError",
    "ProblemSpec",
    "RegularityReport",
    "ResidualReport",
    "RiccatiSolution",
    "SmallnessReport",
    "SpatialGrid",
    "StateTrajectory",
    "SubproblemNonconvex",
    "TailFit",
    "TimeGrid",
    "assemble_input_map",
    "assemble_operator",
    "brute_force_tiny",
    "build_feedback_gain",
    "build_grid",
    "build_time_grid",
    "closed_loop_simulate",
    "coercivity_probe",
    "control_inner",
    "control_norm",
    "default_config",
    "dynamic_programming_check",
    "eigenmode_vector",
    "estimate_smallness",
    "fd_gradient_check",
    "feedback_consistency",
    "finite_horizon_lqr",
    "gaussian_vector",
    "hessian_vector",
    "hjb_residual",
    "initial_covector",
    "initial_state",
    "inner_y",
    "interval_source_norm",
    "lipschitz_probe",
    "load_binary",
    "load_config",
    "lqr_value_and_gradient",
    "make_nonlinearity",
    "make_problem",
    "neg_laplacian_solve",
    "node_times",
    "node_weights",
    "nonlinearity_apply",
    "norm_at",
    "norm_y",
    "optimal_feedback",
    "optimality_residuals",
    "optimize",
    "project_control",
    "reduced_cost",
    "reduced_gradient",
    "resolve_horizon",
    "save_binary",
    "solve_adjoint",
    "solve_adjoint_generic",
    "solve_linearized_kkt",
    "solve_linearized_state",
    "solve_riccati",
    "solve_shifted",
    "solve_state",
    "spectral_abscissa",
    "strong_regularity_probe",
    "tail_decay_fit",
    "trajectory_norm",
    "value",
    "value_gradient",
]
