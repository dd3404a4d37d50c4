"""Discrete elliptic operator A = Laplacian_h + shift * I.

The Laplacian is the classic 3-point stencil (1/h^2)[1, -2, 1] on interior
nodes with homogeneous Dirichlet boundary, so A is symmetric tridiagonal
with constant diagonals. Exact eigenpairs are available and used both for
closed-form test values and for a fast diagonalized stepping path.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import DimensionMismatch
from .grid import SpatialGrid


@dataclass(frozen=True)
class DiscreteOperator:
    grid: SpatialGrid
    shift: float
    diag: float = field(init=False)
    off: float = field(init=False)

    def __post_init__(self):
        h = self.grid.h
        object.__setattr__(self, "diag", -2.0 / h**2 + self.shift)
        object.__setattr__(self, "off", 1.0 / h**2)

    @property
    def n(self):
        return self.grid.n_interior

    def apply(self, y):
        """Matrix-vector product A y (y may be (n,) or (..., n))."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.n:
            raise DimensionMismatch(
                f"operator expects last axis {self.n}, got {y.shape[-1]}"
            )
        out = self.diag * y
        out[..., :-1] += self.off * y[..., 1:]
        out[..., 1:] += self.off * y[..., :-1]
        return out

    def dense(self):
        n = self.n
        a = np.zeros((n, n))
        np.fill_diagonal(a, self.diag)
        if n > 1:
            np.fill_diagonal(a[1:], self.off)
            np.fill_diagonal(a[:, 1:], self.off)
        return a

    def eigenvalues(self):
        """Exact stencil eigenvalues shift - (4/h^2) sin^2(k pi h / (2 L))."""
        h, length = self.grid.h, self.grid.length
        k = np.arange(1, self.n + 1)
        return self.shift - (4.0 / h**2) * np.sin(k * np.pi * h / (2.0 * length)) ** 2

    def eigenbasis(self):
        """Orthonormal eigendecomposition (lam, Q) with A = Q diag(lam) Q^T."""
        if self.n == 1:
            return self.eigenvalues(), np.ones((1, 1))
        d = np.full(self.n, self.diag)
        e = np.full(self.n - 1, self.off)
        lam, q = scipy.linalg.eigh_tridiagonal(d, e)
        return lam, q


def assemble_operator(grid, shift=0.0):
    return DiscreteOperator(grid, float(shift))


def solve_shifted(op, sigma, rhs, extra_diag=None):
    """Solve (sigma * I - A - diag(extra_diag)) z = rhs by a banded solve.

    rhs carries the system on its last axis; leading axes are batched.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = op.n
    if rhs.shape[-1] != n:
        raise DimensionMismatch(f"rhs last axis must be {n}, got {rhs.shape[-1]}")
    ab = np.zeros((3, n))
    ab[0, 1:] = -op.off
    ab[1, :] = sigma - op.diag
    if extra_diag is not None:
        ab[1, :] -= extra_diag
    ab[2, :-1] = -op.off
    if rhs.ndim == 1:
        return scipy.linalg.solve_banded((1, 1), ab, rhs)
    flat = rhs.reshape(-1, n)
    out = scipy.linalg.solve_banded((1, 1), ab, flat.T).T
    return out.reshape(rhs.shape)


def neg_laplacian_solve(grid, rhs):
    """Solve (-Laplacian_h) w = rhs; realizes the discrete dual V* pairing."""
    return solve_shifted(DiscreteOperator(grid, 0.0), 0.0, rhs)
