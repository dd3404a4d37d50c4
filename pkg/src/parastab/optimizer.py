"""Adjoint-based projected descent for the constrained problem, optimality
residuals, Hessian-vector products, the linearized KKT solver, and the
strong-regularity probe.

Everything here works on the exact transpose structure of the time scheme,
so stationarity identities (control projection fixed point, gradient and
Hessian consistency, zero deltas at zero perturbation) hold to solver
tolerance rather than discretization order.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, MaxIterations, SubproblemNonconvex
from .pde_core import (
    AdjointTrajectory,
    ControlTrajectory,
    StateTrajectory,
    interval_source_norm,
    node_weights,
    norm_y,
    solve_adjoint,
    solve_adjoint_generic,
    solve_linearized_state,
    solve_state,
    trajectory_norm,
)

# ---------------------------------------------------------------------------
# control-space arithmetic (arrays of shape (N, m), h- and dt-weighted)


def _u_values(u, n_steps, m):
    if u is None:
        return np.zeros((n_steps, m))
    vals = u.values if isinstance(u, ControlTrajectory) else np.atleast_2d(
        np.asarray(u, dtype=float)
    )
    if vals.shape != (n_steps, m):
        raise DimensionMismatch(
            f"control must have shape ({n_steps}, {m}), got {vals.shape}"
        )
    return vals


def control_inner(problem, tg, a, b):
    """L2(I; U) inner product of interval-constant controls."""
    return tg.dt * problem.grid.h * float(np.sum(a * b))


def control_norm(problem, tg, a):
    return math.sqrt(max(control_inner(problem, tg, a, a), 0.0))


def project_control(grid, v, eta):
    """Radial retraction of each time node onto the control ball |u|_U <= eta.

    Idempotent to the bit and nonexpansive; points already inside (or
    exactly on) the ball pass through unchanged. A single rescale can land
    an ulp outside the ball, so flagged rows are rescaled to a fixed point
    of the same norm test that flags them; the factor is kept strictly
    below one so the loop cannot stall.
    """
    values = v.values if isinstance(v, ControlTrajectory) else np.atleast_2d(
        np.asarray(v, dtype=float)
    )
    out = values.copy()
    if not math.isinf(eta):
        below_one = np.nextafter(1.0, 0.0)
        for _ in range(64):
            norms = np.sqrt(grid.h * np.sum(out * out, axis=1))
            over = norms > eta
            if not np.any(over):
                break
            factor = np.minimum(eta / norms[over], below_one)
            out[over] *= factor[:, None]
    if isinstance(v, ControlTrajectory):
        return ControlTrajectory(v.tg, out)
    return out


# ---------------------------------------------------------------------------
# reduced cost and gradient


def _cost_from(problem, tg, state_values, u_values):
    c = node_weights(tg.n_steps, problem.theta)
    h, dt = problem.grid.h, tg.dt
    state_part = float(c @ np.sum(state_values * state_values, axis=1))
    control_part = problem.alpha * float(np.sum(u_values * u_values))
    return 0.5 * dt * h * (state_part + control_part)


def reduced_cost(problem, tg, y0, u=None):
    """J(u) = (1/2)|y(u)|^2_{L2(I;Y)} + (alpha/2)|u|^2_{L2(I;U)}."""
    vals = _u_values(u, tg.n_steps, problem.m)
    state = solve_state(problem, tg, y0, vals)
    return _cost_from(problem, tg, state.values, vals)


def reduced_gradient(problem, tg, y0, u=None):
    """Gradient alpha u - B* p of the reduced cost, as a ControlTrajectory."""
    vals = _u_values(u, tg.n_steps, problem.m)
    state = solve_state(problem, tg, y0, vals)
    adjoint = solve_adjoint(problem, tg, state)
    return ControlTrajectory(
        tg, problem.alpha * vals - problem.b_adjoint(adjoint.values[:-1])
    )


# ---------------------------------------------------------------------------
# projected descent driver (shared by optimize and the KKT subproblem)


class _DescentBudget(Exception):
    """Internal: iteration budget exhausted; carries the best point."""

    def __init__(self, point, cost, grad, aux, residual):
        super().__init__("iteration budget exhausted")
        self.point = point
        self.cost = cost
        self.grad = grad
        self.aux = aux
        self.residual = residual


def _projected_descent(problem, tg, u0, forward, backward, tol, max_iter,
                       armijo=1e-4, step_max=1e8, step_min=1e-14,
                       convex_guard=False):
    """Projected gradient with Barzilai-Borwein seed steps and monotone
    Armijo backtracking on the projected arc.

    forward(u) -> (cost, aux); backward(u, aux) -> gradient array. Stops at
    natural residual |u - P(u - g)|_U <= tol. With convex_guard, negative
    curvature along an accepted step raises SubproblemNonconvex.
    """
    grid, eta = problem.grid, problem.eta
    u = project_control(grid, u0, eta)
    cost, aux = forward(u)
    grad = backward(u, aux)
    step = 1.0 / max(1e-12, control_norm(problem, tg, grad))
    du = dg = None
    residual = math.inf
    for _ in range(max_iter):
        residual = control_norm(
            problem, tg, u - project_control(grid, u - grad, eta)
        )
        if residual <= tol:
            return u, cost, grad, aux, residual
        if du is not None:
            curvature = control_inner(problem, tg, du, dg)
            sq = control_inner(problem, tg, du, du)
            if convex_guard and curvature < -1e-12 * sq:
                raise SubproblemNonconvex(
                    f"negative curvature {curvature / sq:.3e} along a step",
                    rayleigh=curvature / sq,
                )
            step = sq / curvature if curvature > 0.0 else 4.0 * step
        step = min(max(step, step_min), step_max)
        # round-off guard: near the floor the true decrease per step falls
        # below eps*|J| and a strict monotone test would reject everything
        guard = 4.0 * np.finfo(float).eps * max(1.0, abs(cost))
        accepted = False
        for _ in range(60):
            trial = project_control(grid, u - step * grad, eta)
            d = trial - u
            slope = control_inner(problem, tg, grad, d)
            cost_t, aux_t = forward(trial)
            if cost_t <= cost + armijo * slope + guard:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        grad_t = backward(trial, aux_t)
        du, dg = trial - u, grad_t - grad
        u, cost, grad, aux = trial, cost_t, grad_t, aux_t
    residual = control_norm(problem, tg, u - project_control(grid, u - grad, eta))
    if residual <= tol:
        return u, cost, grad, aux, residual
    raise _DescentBudget(u, cost, grad, aux, residual)


# ---------------------------------------------------------------------------
# the solver


@dataclass
class OptimizerConfig:
    tol_opt: float = 1e-8  # natural-residual stop, relative to max(1, |y0|)
    tol_kkt: float = 1e-10  # absolute stop for the linearized subproblem
    max_iter: int = 500
    kkt_max_iter: int = 2000
    armijo: float = 1e-4
    u0: Optional[np.ndarray] = None  # warm start (N, m)


@dataclass
class ResidualReport:
    state_residual: float
    adjoint_residual: float
    projection_residual: float
    complementarity_gap: float


@dataclass
class OptimalTriple:
    ybar: StateTrajectory
    ubar: ControlTrajectory
    pbar: AdjointTrajectory
    cost: float
    residuals: ResidualReport
    converged: bool
    iterations: int


def optimize(problem, tg, y0, cfg=None):
    """Minimize the reduced cost over ball-constrained controls.

    Projected gradient with BB steps and Armijo backtracking; iterates are
    monotone in J. Raises MaxIterations with the best triple attached when
    the natural residual does not reach tol_opt * max(1, |y0|_Y).
    """
    cfg = cfg or OptimizerConfig()
    y0 = np.asarray(y0, dtype=float).ravel()
    n_steps, m = tg.n_steps, problem.m
    u0 = _u_values(cfg.u0, n_steps, m) if cfg.u0 is not None else np.zeros(
        (n_steps, m)
    )
    evals = [0]

    def forward(u):
        evals[0] += 1
        state = solve_state(problem, tg, y0, u)
        return _cost_from(problem, tg, state.values, u), state

    def backward(u, state):
        adjoint = solve_adjoint(problem, tg, state)
        return (
            problem.alpha * u - problem.b_adjoint(adjoint.values[:-1]),
            adjoint,
        )

    adj_box = [None]

    def backward_keep(u, state):
        grad, adjoint = backward(u, state)
        adj_box[0] = adjoint
        return grad

    tol = cfg.tol_opt * max(1.0, norm_y(problem.grid, y0))
    try:
        u, cost, grad, state, residual = _projected_descent(
            problem, tg, u0, forward, backward_keep, tol, cfg.max_iter,
            armijo=cfg.armijo,
        )
        converged = True
    except _DescentBudget as stall:
        u, cost, grad, state = stall.point, stall.cost, stall.grad, stall.aux
        residual = stall.residual
        converged = False
    triple = _assemble_triple(
        problem, tg, state, u, adj_box[0], cost, converged, evals[0]
    )
    if not converged:
        raise MaxIterations(
            f"optimize stalled at natural residual {residual:.3e} (tol {tol:.3e})",
            best=triple, residual=residual,
        )
    return triple


def _assemble_triple(problem, tg, state, u, adjoint, cost, converged, iters):
    ubar = ControlTrajectory(tg, u)
    if adjoint is None:
        adjoint = solve_adjoint(problem, tg, state)
    triple = OptimalTriple(
        ybar=state, ubar=ubar, pbar=adjoint, cost=cost,
        residuals=None, converged=converged, iterations=iters,
    )
    triple.residuals = optimality_residuals(problem, triple)
    return triple


def optimality_residuals(problem, triple, tol_active=1e-9):
    """Scheme residuals of the state/adjoint marches plus the natural
    residual of the control variational inequality."""
    tg = triple.ybar.tg
    dt, theta = tg.dt, problem.theta
    y = triple.ybar.values
    u = triple.ubar.values
    p = triple.pbar.values
    op, nl = problem.op, problem.nl
    bu = problem.b_apply(u)

    drift = op.apply(y) + nl.f(y)
    state_res = y[1:] - y[:-1] - dt * (
        theta * drift[1:] + (1.0 - theta) * drift[:-1] + bu
    )
    state_residual = float(
        np.max(np.sqrt(problem.grid.h * np.sum(state_res**2, axis=1)))
    )

    c = node_weights(tg.n_steps, theta)
    fp = nl.fp(y)
    gp = op.apply(p) + fp * p
    # backward march residual at nodes j = 1..N, all terms at node j
    adj_res = (
        p[:-1] - dt * theta * (op.apply(p[:-1]) + fp[1:] * p[:-1])
        - p[1:] - dt * (1.0 - theta) * gp[1:] + dt * c[1:, None] * y[1:]
    )
    adjoint_residual = float(
        np.max(np.sqrt(problem.grid.h * np.sum(adj_res**2, axis=1)))
    )

    grad = problem.alpha * u - problem.b_adjoint(p[:-1])
    proj = project_control(problem.grid, u - grad, problem.eta)
    projection_residual = control_norm(problem, tg, u - proj)

    complementarity_gap = 0.0
    if problem.constrained:
        cand = problem.b_adjoint(p[:-1]) / problem.alpha
        cand_norms = np.sqrt(problem.grid.h * np.sum(cand * cand, axis=1))
        u_norms = np.sqrt(problem.grid.h * np.sum(u * u, axis=1))
        active = cand_norms >= problem.eta - tol_active
        if np.any(active):
            complementarity_gap = float(
                np.max(np.abs(u_norms[active] - problem.eta))
            )
    return ResidualReport(
        state_residual=state_residual,
        adjoint_residual=adjoint_residual,
        projection_residual=projection_residual,
        complementarity_gap=complementarity_gap,
    )


# ---------------------------------------------------------------------------
# second-order structure


def _curvature_weights(problem, pbar_values, theta):
    """kappa_j = theta p_{j-1} + (1-theta) p_j for j = 1..N (row 0 unused)."""
    kappa = np.zeros_like(pbar_values)
    kappa[1:] = theta * pbar_values[:-1] + (1.0 - theta) * pbar_values[1:]
    return kappa


def hessian_vector(problem, triple, w):
    """Apply the reduced Hessian at the triple to a control direction w.

    v is the linearized state along w; the second adjoint carries the
    tracking term and the nonlinearity curvature weighted by the base
    adjoint; the product is alpha w - B* q.
    """
    tg = triple.ybar.tg
    w_vals = _u_values(w, tg.n_steps, problem.m)
    v = solve_linearized_state(problem, tg, triple.ybar, controls=w_vals)
    c = node_weights(tg.n_steps, problem.theta)
    kappa = _curvature_weights(problem, triple.pbar.values, problem.theta)
    fpp = problem.nl.fpp(triple.ybar.values)
    sources = c[:, None] * v.values - fpp * kappa * v.values
    q = solve_adjoint_generic(problem, tg, triple.ybar, sources)
    hw = problem.alpha * w_vals - problem.b_adjoint(q.values[:-1])
    if isinstance(w, ControlTrajectory):
        return ControlTrajectory(tg, hw)
    return hw


@dataclass
class CoercivitySample:
    sample_id: int
    rayleigh_l2: float
    rayleigh_winf: float


@dataclass
class CoercivityReport:
    min_rayleigh: float
    gamma_bar_estimate: float
    samples: int
    rows: list = field(default_factory=list)


def coercivity_probe(problem, triple, n_samples, seed=0):
    """Sampled Rayleigh quotients of the reduced Hessian on kernel-consistent
    pairs (v, w), v the linearized state of w with v(0) = 0.

    min_rayleigh divides by |v|^2 + |w|^2 in the L2 pairs; the gamma-bar
    surrogate uses the stronger trajectory norm on v.
    """
    tg = triple.ybar.tg
    rng = np.random.default_rng(seed)
    min_rayleigh = math.inf
    gamma_bar = math.inf
    rows = []
    for sample in range(int(n_samples)):
        w = rng.standard_normal((tg.n_steps, problem.m))
        v = solve_linearized_state(problem, tg, triple.ybar, controls=w)
        hw = hessian_vector(problem, triple, w)
        num = control_inner(problem, tg, hw, w)
        w_sq = control_inner(problem, tg, w, w)
        v_l2 = trajectory_norm(problem.grid, v, "l2_y", theta=problem.theta)
        v_winf = trajectory_norm(problem.grid, v, "winf", theta=problem.theta)
        r_l2 = num / (v_l2**2 + w_sq)
        r_winf = num / (v_winf**2 + w_sq)
        rows.append(CoercivitySample(sample, r_l2, r_winf))
        min_rayleigh = min(min_rayleigh, r_l2)
        gamma_bar = min(gamma_bar, r_winf)
    return CoercivityReport(
        min_rayleigh=min_rayleigh, gamma_bar_estimate=gamma_bar,
        samples=int(n_samples), rows=rows,
    )


# ---------------------------------------------------------------------------
# linearized KKT system


@dataclass
class KktPerturbation:
    beta1: np.ndarray  # adjoint-equation source, node values (N+1, n)
    beta2: np.ndarray  # control-inequality shift, interval values (N, m)
    beta3: np.ndarray  # state-equation source, interval values (N, n)
    beta4: np.ndarray  # initial-condition shift, (n,)

    @classmethod
    def zeros(cls, problem, tg):
        return cls(
            beta1=np.zeros((tg.n_steps + 1, problem.n)),
            beta2=np.zeros((tg.n_steps, problem.m)),
            beta3=np.zeros((tg.n_steps, problem.n)),
            beta4=np.zeros(problem.n),
        )

    def validate(self, problem, tg):
        shapes = {
            "beta1": (self.beta1, (tg.n_steps + 1, problem.n)),
            "beta2": (self.beta2, (tg.n_steps, problem.m)),
            "beta3": (self.beta3, (tg.n_steps, problem.n)),
            "beta4": (self.beta4, (problem.n,)),
        }
        for name, (arr, want) in shapes.items():
            if np.shape(arr) != want:
                raise DimensionMismatch(
                    f"{name} must have shape {want}, got {np.shape(arr)}"
                )


def solve_linearized_kkt(problem, triple, beta, tol_kkt=1e-10, max_iter=2000):
    """Solve the optimality system linearized at the triple under the
    perturbation beta; returns (delta_y, delta_u, delta_p) trajectories.

    Realized as the equivalent ball-constrained linear-quadratic problem in
    u' = ubar + delta_u, solved by the same projected descent. The backward
    solve for the subproblem multiplier P uses the combined source, so
    P = pbar + delta_p exactly and beta = 0 reproduces the base triple
    bitwise when the base residual is already below tol_kkt.
    """
    tg = triple.ybar.tg
    beta.validate(problem, tg)
    ybar = triple.ybar.values
    ubar = triple.ubar.values
    c = node_weights(tg.n_steps, problem.theta)
    kappa = _curvature_weights(problem, triple.pbar.values, problem.theta)
    fpp = problem.nl.fpp(ybar)
    curv = fpp * kappa  # pointwise weight of the curvature term
    h, dt = problem.grid.h, tg.dt

    def forward(u_prime):
        du = u_prime - ubar
        dy = solve_linearized_state(
            problem, tg, triple.ybar, controls=du, v0=beta.beta4,
            extra_sources=beta.beta3,
        )
        dyv = dy.values
        track = 0.5 * np.sum(dyv * dyv, axis=1) + np.sum(
            (ybar - beta.beta1) * dyv, axis=1
        )
        bend = 0.5 * np.sum(curv * dyv * dyv, axis=1)
        phi = dt * h * float(c @ (track - bend))
        phi += dt * h * (
            0.5 * problem.alpha * float(np.sum(u_prime * u_prime))
            - float(np.sum(beta.beta2 * u_prime))
        )
        return phi, dy

    def backward(u_prime, dy):
        sources = c[:, None] * (dy.values + ybar - beta.beta1) - curv * dy.values
        p_full = solve_adjoint_generic(problem, tg, triple.ybar, sources)
        return (
            problem.alpha * u_prime - beta.beta2
            - problem.b_adjoint(p_full.values[:-1]),
            p_full,
        )

    p_box = [None]

    def backward_keep(u_prime, dy):
        grad, p_full = backward(u_prime, dy)
        p_box[0] = p_full
        return grad

    try:
        u_prime, _, _, dy, _ = _projected_descent(
            problem, tg, ubar.copy(), forward, backward_keep, tol_kkt,
            max_iter, convex_guard=True,
        )
    except _DescentBudget as stall:
        raise MaxIterations(
            f"linearized KKT solve stalled at residual {stall.residual:.3e}",
            best=None, residual=stall.residual,
        ) from None
    if p_box[0] is None:
        _, p_box[0] = backward(u_prime, dy)
    delta_u = ControlTrajectory(tg, u_prime - ubar)
    delta_p = AdjointTrajectory(tg, p_box[0].values - triple.pbar.values)
    return dy, delta_u, delta_p


# ---------------------------------------------------------------------------
# strong-regularity probe


@dataclass
class RegularityRow:
    pair_id: int
    norm_dbeta: float
    norm_ddelta: float
    ratio: float


@dataclass
class RegularityReport:
    max_ratio: float
    rows: list = field(default_factory=list)


def _beta_norm(problem, tg, b1, b2, b3, b4):
    c = node_weights(tg.n_steps, problem.theta)
    h, dt = problem.grid.h, tg.dt
    n1 = math.sqrt(max(dt * h * float(c @ np.sum(b1 * b1, axis=1)), 0.0))
    n2 = math.sqrt(max(dt * h * float(np.sum(b2 * b2)), 0.0))
    n3 = interval_source_norm(problem.grid, b3, dt, weight="y")
    n4 = norm_y(problem.grid, b4)
    return n1 + n2 + n3 + n4


def _delta_norm(problem, dy, du, dp):
    theta = problem.theta
    return (
        trajectory_norm(problem.grid, dy, "winf", theta=theta)
        + trajectory_norm(problem.grid, du, "l2_y", theta=theta)
        + trajectory_norm(problem.grid, du, "sup_y", theta=theta)
        + trajectory_norm(problem.grid, dp, "winf", theta=theta)
    )


def _sample_beta(problem, tg, rng, radius):
    raw = KktPerturbation(
        beta1=rng.standard_normal((tg.n_steps + 1, problem.n)),
        beta2=rng.standard_normal((tg.n_steps, problem.m)),
        beta3=rng.standard_normal((tg.n_steps, problem.n)),
        beta4=rng.standard_normal(problem.n),
    )
    size = _beta_norm(problem, tg, raw.beta1, raw.beta2, raw.beta3, raw.beta4)
    s = radius / max(size, 1e-300)
    return KktPerturbation(
        beta1=raw.beta1 * s, beta2=raw.beta2 * s,
        beta3=raw.beta3 * s, beta4=raw.beta4 * s,
    )


def strong_regularity_probe(problem, triple, n_pairs, radius, seed=0,
                            shared_direction=False, tol_kkt=1e-10,
                            max_iter=2000, map_fn=map):
    """Sampled Lipschitz ratios of the linearized-KKT solution map.

    Each pair perturbs beta by a random difference; with shared_direction
    the difference direction is fixed across pairs (anchors and scales
    vary), the witness for linear solution maps. Draws happen before any
    solve, so a parallel order-preserving map_fn changes nothing.
    """
    tg = triple.ybar.tg
    rng = np.random.default_rng(seed)
    fixed = _sample_beta(problem, tg, rng, 1.0) if shared_direction else None
    pairs = []
    for pair in range(int(n_pairs)):
        anchor = _sample_beta(problem, tg, rng, radius)
        if shared_direction:
            scale = radius * 10.0 ** rng.uniform(-1.0, 0.0)
            other = KktPerturbation(
                beta1=anchor.beta1 + scale * fixed.beta1,
                beta2=anchor.beta2 + scale * fixed.beta2,
                beta3=anchor.beta3 + scale * fixed.beta3,
                beta4=anchor.beta4 + scale * fixed.beta4,
            )
        else:
            other = _sample_beta(problem, tg, rng, radius)
        pairs.append((pair, anchor, other))

    def one_pair(item):
        pair, anchor, other = item
        dbeta = _beta_norm(
            problem, tg,
            anchor.beta1 - other.beta1, anchor.beta2 - other.beta2,
            anchor.beta3 - other.beta3, anchor.beta4 - other.beta4,
        )
        if dbeta <= 1e-15 * max(1.0, radius):
            return None
        ya, ua, pa = solve_linearized_kkt(
            problem, triple, anchor, tol_kkt=tol_kkt, max_iter=max_iter
        )
        yb, ub, pb = solve_linearized_kkt(
            problem, triple, other, tol_kkt=tol_kkt, max_iter=max_iter
        )
        ddelta = _delta_norm(
            problem,
            StateTrajectory(tg, ya.values - yb.values),
            ControlTrajectory(tg, ua.values - ub.values),
            AdjointTrajectory(tg, pa.values - pb.values),
        )
        return RegularityRow(pair, dbeta, ddelta, ddelta / dbeta)

    rows = [row for row in map_fn(one_pair, pairs) if row is not None]
    max_ratio = max((row.ratio for row in rows), default=0.0)
    return RegularityReport(max_ratio=max_ratio, rows=rows)
