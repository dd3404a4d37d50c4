"""Independent reference solutions used to cross-check the main solver.

Three routes that share no code with the iterative optimizer:

  * solve_riccati: algebraic Riccati equation of the continuous-time
    unconstrained linear-quadratic problem, by Newton-Kleinman iteration
    (one dense Lyapunov solve per step).
  * finite_horizon_lqr: backward recursion giving the EXACT minimizer of
    the time-discretized unconstrained LQ problem.
  * brute_force_tiny: exhaustive search over per-node control grids for
    scalar instances, refined once around the first argmin.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, EnumerationTooLarge, MaxIterations
from .pde_core import node_weights
from .stabilization import build_feedback_gain, spectral_abscissa


@dataclass
class RiccatiSolution:
    p: np.ndarray  # value Hessian, symmetric psd
    k_lqr: np.ndarray  # (1/alpha) B^T P
    iterations: int
    residual: float


def solve_riccati(a, b, alpha, weight, tol=1e-10, max_iter=60):
    """Solve A^T P + P A - (1/alpha) P B B^T P + W = 0.

    Newton-Kleinman: the initial stabilizing gain comes from
    build_feedback_gain (zero when A is stable, shifted pseudoinverse
    otherwise); every iterate solves one Lyapunov equation and keeps the
    closed loop stable, so the residual converges quadratically.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    w = np.atleast_2d(np.asarray(weight, dtype=float))
    n = a.shape[0]
    if a.shape != (n, n) or w.shape != (n, n) or b.shape[0] != n:
        raise ConfigError("riccati operands have inconsistent shapes")
    if not alpha > 0.0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    method = "zero" if spectral_abscissa(a) < 0.0 else "shift"
    gain = build_feedback_gain(a, b, method=method, alpha=alpha).matrix
    best, best_res = None, math.inf
    for it in range(1, max_iter + 1):
        closed = a - b @ gain
        p = scipy.linalg.solve_continuous_lyapunov(
            closed.T, -(w + alpha * gain.T @ gain)
        )
        p = 0.5 * (p + p.T)
        res = a.T @ p + p @ a - (1.0 / alpha) * (p @ b) @ (b.T @ p) + w
        res_norm = float(np.linalg.norm(res))
        if res_norm < best_res:
            best, best_res = p, res_norm
        if res_norm <= tol:
            return RiccatiSolution(
                p=p, k_lqr=(1.0 / alpha) * b.T @ p,
                iterations=it, residual=res_norm,
            )
        gain = (1.0 / alpha) * b.T @ p
    raise MaxIterations(
        f"riccati iteration stalled at residual {best_res:.3e}",
        best=best, residual=best_res,
    )


def lqr_value_and_gradient(p, y0, mass=1.0):
    """Closed-form LQ value and gradient from a Riccati matrix.

    mass is the scalar weight of the state inner product (grid spacing h
    for the PDE instances, 1 for plain vectors): V = (1/2) mass y0^T P y0,
    gradient P y0 as the weighted-pairing representer.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    y0 = np.asarray(y0, dtype=float).ravel()
    if p.shape != (y0.size, y0.size):
        raise ConfigError(f"P shape {p.shape} does not match y0 size {y0.size}")
    value = 0.5 * mass * float(y0 @ p @ y0)
    return value, p @ y0


@dataclass
class FiniteHorizonLqr:
    value: float
    controls: np.ndarray  # (N, m)
    states: np.ndarray  # (N+1, n)


def finite_horizon_lqr(problem, tg, y0):
    """Exact minimizer of the discretized unconstrained LQ problem.

    Dense backward recursion over the one-step transition of the scheme,
    T = S (I + dt (1-theta) A), S = (I - dt theta A)^{-1}, with node costs
    collected on arrival using the scheme's quadrature weights. Any control
    bound is ignored; linear kind only.
    """
    if not problem.nl.is_linear:
        raise ConfigError("finite-horizon recursion is an oracle for the linear kind")
    y0 = np.asarray(y0, dtype=float).ravel()
    n, m = problem.n, problem.m
    dt, theta, alpha, h = tg.dt, problem.theta, problem.alpha, problem.grid.h
    a = problem.op.dense()
    bmat = problem.b_dense
    s = np.linalg.inv(np.eye(n) - dt * theta * a)
    trans = s @ (np.eye(n) + dt * (1.0 - theta) * a)
    inp = dt * (s @ bmat)
    c = node_weights(tg.n_steps, theta)
    pi = np.zeros((n, n))
    gains = np.empty((tg.n_steps, m, n))
    for k in range(tg.n_steps - 1, -1, -1):
        wk = dt * c[k + 1] * np.eye(n) + pi
        wt = wk @ trans
        gram = dt * alpha * np.eye(m) + inp.T @ wk @ inp
        gains[k] = np.linalg.solve(gram, inp.T @ wt)
        pi = trans.T @ wt - (wt.T @ inp) @ gains[k]
        pi = 0.5 * (pi + pi.T)
    states = np.empty((tg.n_steps + 1, n))
    controls = np.empty((tg.n_steps, m))
    states[0] = y0
    for k in range(tg.n_steps):
        controls[k] = -gains[k] @ states[k]
        states[k + 1] = trans @ states[k] + inp @ controls[k]
    value = h * (0.5 * float(y0 @ pi @ y0) + dt * c[0] * 0.5 * float(y0 @ y0))
    return FiniteHorizonLqr(value=value, controls=controls, states=states)


@dataclass
class BruteForceResult:
    best_u: np.ndarray  # (N,) raw control dof values
    best_j: float
    spacing: np.ndarray  # (N,) winning grid spacing per interval
    neighbor_gap: float  # largest cost rise to a +-1-cell neighbor
    evaluations: int


def brute_force_tiny(problem, tg, y0, control_grid=None, cap=10_000_000,
                     refine=True):
    """Exhaustive search over per-node scalar controls in the eta ball.

    The admissible interval in raw dof values is |u| <= eta / sqrt(h)
    (the control norm carries the h weight). control_grid supplies raw
    candidate values, thinned to the ball; default 21 uniform points.
    A second pass shrinks to +-5 cells around the first argmin with half
    the spacing. Diverged trajectories score +inf.
    """
    if problem.n != 1 or problem.m != 1:
        raise ConfigError("enumeration handles scalar problems only")
    raw_bound = problem.eta / math.sqrt(problem.grid.h)
    if control_grid is None:
        if not problem.constrained:
            raise ConfigError("enumeration needs a finite control bound or a grid")
        base = np.linspace(-raw_bound, raw_bound, 21)
    else:
        base = np.asarray(control_grid, dtype=float).ravel()
        base = base[np.abs(base) <= raw_bound]
        if base.size < 2:
            raise ConfigError("control grid has fewer than 2 admissible points")
    n_grid = tg.n_steps
    requested = base.size**n_grid
    if requested > cap:
        raise EnumerationTooLarge(
            f"grid has {requested} points, cap is {cap}",
            requested=requested, cap=cap,
        )
    y0 = float(np.asarray(y0, dtype=float).ravel()[0])

    cost, combo, evals = _enumerate(problem, tg, y0, [base] * n_grid)
    cell = float(base[1] - base[0])
    spacing = np.full(n_grid, cell)
    if refine:
        grids, spacing = [], np.empty(n_grid)
        for k in range(n_grid):
            lo = max(-raw_bound, combo[k] - 5.0 * cell)
            hi = min(raw_bound, combo[k] + 5.0 * cell)
            grids.append(np.linspace(lo, hi, base.size))
            spacing[k] = (hi - lo) / (base.size - 1)
        cost2, combo2, evals2 = _enumerate(problem, tg, y0, grids)
        evals += evals2
        if cost2 <= cost:
            cost, combo = cost2, combo2
        else:
            spacing = np.full(n_grid, cell)

    gap = 0.0
    for k in range(n_grid):
        for sign in (-1.0, 1.0):
            trial = combo.copy()
            trial[k] = min(raw_bound, max(-raw_bound, trial[k] + sign * spacing[k]))
            j = float(_scalar_costs(problem, tg, y0, trial[None, :])[0])
            evals += 1
            if math.isfinite(j):
                gap = max(gap, j - cost)
    return BruteForceResult(
        best_u=combo, best_j=cost, spacing=spacing,
        neighbor_gap=gap, evaluations=evals,
    )


def _enumerate(problem, tg, y0, grids):
    mesh = np.meshgrid(*grids, indexing="ij")
    combos = np.stack([g.ravel() for g in mesh], axis=-1)
    costs = _scalar_costs(problem, tg, y0, combos)
    best = int(np.argmin(costs))
    return float(costs[best]), combos[best].copy(), combos.shape[0]


def _scalar_costs(problem, tg, y0, combos):
    """Cost of every control sequence in combos (M, N), vectorized over M."""
    dt, theta, alpha, h = tg.dt, problem.theta, problem.alpha, problem.grid.h
    a = float(problem.op.dense()[0, 0])
    b = float(problem.b_dense[0, 0])
    f, fp = problem.nl.f, problem.nl.fp
    c = node_weights(tg.n_steps, theta)
    m = combos.shape[0]
    y = np.full(m, y0)
    state_sum = np.full(m, c[0] * y0 * y0)
    bad = np.zeros(m, dtype=bool)
    for k in range(tg.n_steps):
        rhs = y + dt * (1.0 - theta) * (a * y + f(y)) + dt * b * combos[:, k]
        z = y.copy()
        for _ in range(60):
            res = z - dt * theta * (a * z + f(z)) - rhs
            ok = ~bad
            if float(np.max(np.abs(res[ok]), initial=0.0)) <= 1e-13 * max(
                1.0, float(np.max(np.abs(rhs[ok]), initial=1.0))
            ):
                break
            z = z - res / (1.0 - dt * theta * (a + fp(z)))
            with np.errstate(invalid="ignore"):
                bad |= ~np.isfinite(z) | (np.abs(z) > 1e6)
            z[bad] = 0.0
        else:
            res = z - dt * theta * (a * z + f(z)) - rhs
            bad |= np.abs(res) > 1e-8 * np.maximum(1.0, np.abs(rhs))
        y = z
        state_sum += c[k + 1] * y * y
    control_sum = np.sum(combos * combos, axis=1)
    costs = h * (0.5 * dt * state_sum + 0.5 * alpha * dt * control_sum)
    costs[bad] = np.inf
    return costs
