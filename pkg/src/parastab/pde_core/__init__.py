"""Spatial discretization, nonlinearities, trajectories, norms, and the
forward/linearized/adjoint time stepping."""

from .grid import (
    SpatialGrid,
    TimeGrid,
    build_grid,
    build_time_grid,
    eigenmode_vector,
    gaussian_vector,
)
from .nonlinearity import (
    DEFAULT_SHIFT,
    KINDS,
    Nonlinearity,
    make_nonlinearity,
    nonlinearity_apply,
)
from .norms import (
    TailFit,
    inner_u,
    inner_y,
    interval_source_norm,
    node_weights,
    norm_at,
    norm_u,
    norm_v,
    norm_vstar,
    norm_y,
    tail_decay_fit,
    trajectory_norm,
)
from .operators import (
    DiscreteOperator,
    assemble_operator,
    neg_laplacian_solve,
    solve_shifted,
)
from .problem import ProblemSpec, assemble_input_map, initial_state, make_problem
from .stepping import (
    initial_covector,
    solve_adjoint,
    solve_adjoint_generic,
    solve_linearized_state,
    solve_state,
)
from .trajectory import (
    AdjointTrajectory,
    ControlTrajectory,
    StateTrajectory,
    load_binary,
    node_times,
    save_binary,
    write_csv,
)

__all__ = [
    "SpatialGrid", "TimeGrid", "build_grid", "build_time_grid",
    "eigenmode_vector", "gaussian_vector",
    "DEFAULT_SHIFT", "KINDS", "Nonlinearity", "make_nonlinearity",
    "nonlinearity_apply",
    "TailFit", "inner_u", "inner_y", "interval_source_norm", "node_weights",
    "norm_at", "norm_u", "norm_v", "norm_vstar", "norm_y", "tail_decay_fit",
    "trajectory_norm",
    "DiscreteOperator", "assemble_operator", "neg_laplacian_solve",
    "solve_shifted",
    "ProblemSpec", "assemble_input_map", "initial_state", "make_problem",
    "initial_covector", "solve_adjoint", "solve_adjoint_generic",
    "solve_linearized_state", "solve_state",
    "AdjointTrajectory", "ControlTrajectory", "StateTrajectory",
    "load_binary", "node_times", "save_binary", "write_csv",
]
