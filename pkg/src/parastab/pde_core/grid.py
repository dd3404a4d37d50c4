"""Uniform 1-d grids on (0, L) with homogeneous Dirichlet ends.

Only interior nodes are stored; the boundary values are identically zero
and never appear in state vectors.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch


@dataclass(frozen=True)
class SpatialGrid:
    n_interior: int
    length: float
    h: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_interior < 1:
            raise DimensionMismatch(f"n_interior must be >= 1, got {self.n_interior}")
        if not self.length > 0.0:
            raise DimensionMismatch(f"length must be positive, got {self.length}")
        h = self.length / (self.n_interior + 1)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x", h * np.arange(1, self.n_interior + 1))


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int
    horizon: float
    dt: float = field(init=False)
    t: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_steps < 1:
            raise DimensionMismatch(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.horizon > 0.0:
            raise DimensionMismatch(f"horizon must be positive, got {self.horizon}")
        dt = self.horizon / self.n_steps
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "t", dt * np.arange(self.n_steps + 1))


def build_grid(n_interior, length=1.0):
    return SpatialGrid(int(n_interior), float(length))


def build_time_grid(horizon, n_steps):
    return TimeGrid(int(n_steps), float(horizon))


def eigenmode_vector(grid, k, amplitude=1.0):
    """k-th Dirichlet Laplacian eigenvector sin(k pi x / L), peak-scaled."""
    if not 1 <= k <= grid.n_interior:
        raise DimensionMismatch(
            f"eigenmode index must be in [1, {grid.n_interior}], got {k}"
        )
    return amplitude * np.sin(k * np.pi * grid.x / grid.length)


def gaussian_vector(grid, center, width, amplitude=1.0):
    if not 0.0 < center < grid.length:
        raise DimensionMismatch(f"gaussian center must lie in (0, {grid.length})")
    if not width > 0.0:
        raise DimensionMismatch("gaussian width must be positive")
    return amplitude * np.exp(-0.5 * ((grid.x - center) / width) ** 2)
