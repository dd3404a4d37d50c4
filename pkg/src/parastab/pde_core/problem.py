"""Problem description: dynamics y' = A y + f(y) + B u, cost, and constraint.

The running cost is (1/2)|y|_Y^2 + (alpha/2)|u|_U^2 and the admissible set
is the pointwise-in-time ball |u(t)|_U <= eta (eta = inf disables it). The
input map defaults to the identity; rectangular maps are assembled from
Gaussian actuator columns.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, DimensionMismatch
from .grid import SpatialGrid, build_grid, eigenmode_vector, gaussian_vector
from .nonlinearity import DEFAULT_SHIFT, Nonlinearity, make_nonlinearity
from .operators import DiscreteOperator, assemble_operator


@dataclass
class ProblemSpec:
    grid: SpatialGrid
    op: DiscreteOperator
    nl: Nonlinearity
    alpha: float
    eta: float  # control-norm bound; math.inf for unconstrained
    b_matrix: Optional[np.ndarray] = None  # None means identity
    theta: float = 1.0  # implicit weight of the time scheme
    tol_step: float = 1e-12
    max_newton: int = 25
    name: str = ""

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not self.eta > 0.0:
            raise ConfigError(f"eta must be positive (or inf), got {self.eta}")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError(f"theta must lie in (0, 1], got {self.theta}")
        if self.b_matrix is not None:
            b = np.atleast_2d(np.asarray(self.b_matrix, dtype=float))
            if b.shape[0] != self.grid.n_interior:
                raise DimensionMismatch(
                    f"input map has {b.shape[0]} rows, expected {self.grid.n_interior}"
                )
            self.b_matrix = b

    @property
    def n(self):
        return self.grid.n_interior

    @property
    def m(self):
        return self.n if self.b_matrix is None else self.b_matrix.shape[1]

    @property
    def constrained(self):
        return math.isfinite(self.eta)

    def b_apply(self, u):
        """B u with the control on the last axis."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.m:
            raise DimensionMismatch(f"control last axis must be {self.m}")
        return u if self.b_matrix is None else u @ self.b_matrix.T

    def b_adjoint(self, y):
        """B* y; equals B^T y because state and control share the h weight."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.n:
            raise DimensionMismatch(f"state last axis must be {self.n}")
        return y if self.b_matrix is None else y @ self.b_matrix

    @property
    def b_dense(self):
        return np.eye(self.n) if self.b_matrix is None else np.array(self.b_matrix)


def make_problem(
    kind="fisher",
    n_interior=32,
    length=1.0,
    alpha=0.1,
    eta=math.inf,
    shift=None,
    gamma=0.5,
    b_spec=None,
    theta=1.0,
    tol_step=1e-12,
    max_newton=25,
):
    grid = build_grid(n_interior, length)
    nl = make_nonlinearity(kind, gamma=gamma)
    if shift is None:
        shift = DEFAULT_SHIFT[nl.kind]
    op = assemble_operator(grid, shift)
    b_matrix = None if b_spec is None else assemble_input_map(grid, b_spec)
    return ProblemSpec(
        grid=grid,
        op=op,
        nl=nl,
        alpha=float(alpha),
        eta=float(eta),
        b_matrix=b_matrix,
        theta=float(theta),
        tol_step=float(tol_step),
        max_newton=int(max_newton),
        name=nl.kind,
    )


def assemble_input_map(grid, b_spec):
    """Input map from a spec string: 'identity' or
    'gaussians c1 c2 ... : width' (one actuator column per center)."""
    text = str(b_spec).strip()
    if text in ("", "identity"):
        return None
    parts = text.split()
    if parts[0] != "gaussians":
        raise ConfigError(f"unknown input map spec {b_spec!r}")
    try:
        sep = parts.index(":")
        centers = [float(tok) for tok in parts[1:sep]]
        width = float(parts[sep + 1])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad input map spec {b_spec!r}") from exc
    if not centers:
        raise ConfigError("input map needs at least one actuator center")
    cols = [gaussian_vector(grid, c, width, 1.0) for c in centers]
    return np.stack(cols, axis=1)


def initial_state(grid, text):
    """Initial state grammar: 'zero' | 'eigenmode K AMP' |
    'gaussian CENTER WIDTH AMP' | 'file PATH' (one value per line)."""
    parts = str(text).strip().split()
    if not parts:
        raise ConfigError("empty initial state spec")
    head, rest = parts[0], parts[1:]
    if head == "zero":
        return np.zeros(grid.n_interior)
    if head == "eigenmode":
        if len(rest) != 2:
            raise ConfigError("eigenmode spec needs: eigenmode K AMPLITUDE")
        return eigenmode_vector(grid, int(rest[0]), float(rest[1]))
    if head == "gaussian":
        if len(rest) != 3:
            raise ConfigError("gaussian spec needs: gaussian CENTER WIDTH AMPLITUDE")
        return gaussian_vector(grid, float(rest[0]), float(rest[1]), float(rest[2]))
    if head == "file":
        if len(rest) != 1:
            raise ConfigError("file spec needs: file PATH")
        values = np.loadtxt(rest[0], dtype=float).ravel()
        if values.size != grid.n_interior:
            raise DimensionMismatch(
                f"file holds {values.size} values, grid has {grid.n_interior} nodes"
            )
        return values
    raise ConfigError(f"unknown initial state kind {head!r}")
