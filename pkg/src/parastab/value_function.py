"""Value function of the stabilization problem and its certificates.

The value of an initial state is the optimal cost on the resolved horizon.
Its gradient is computed from the adjoint at the initial time through the
exact discrete stationarity relation, so finite-difference checks converge
at second order in the step and the sensitivity identity holds to solver
tolerance, not discretization order.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .optimizer import OptimizerConfig, optimize, project_control
from .pde_core import (
    TimeGrid,
    inner_y,
    initial_covector,
    node_weights,
    norm_y,
    trajectory_norm,
)


def _solve(problem, tg, y0, cfg, warm=None):
    if cfg is None:
        cfg = OptimizerConfig()
    if warm is not None:
        cfg = OptimizerConfig(
            tol_opt=cfg.tol_opt, tol_kkt=cfg.tol_kkt, max_iter=cfg.max_iter,
            kkt_max_iter=cfg.kkt_max_iter, armijo=cfg.armijo, u0=warm,
        )
    return optimize(problem, tg, y0, cfg)


def value(problem, tg, y0, cfg=None, triple=None):
    """Optimal cost from the initial state on the given time grid."""
    if triple is None:
        triple = _solve(problem, tg, y0, cfg)
    return triple.cost


def value_gradient(problem, tg, y0, cfg=None, triple=None):
    """Riesz representer of the value derivative at y0.

    Equals dt c_0 y0 minus the costate propagated through the initial
    half-step; at theta = 1 this is exactly minus the adjoint at time zero.
    """
    if triple is None:
        triple = _solve(problem, tg, y0, cfg)
    lam = initial_covector(problem, tg, triple.ybar, triple.pbar)
    c0 = node_weights(tg.n_steps, problem.theta)[0]
    return tg.dt * c0 * triple.ybar.values[0] - lam


# ---------------------------------------------------------------------------
# finite-difference gradient check


@dataclass
class GradientCheckRow:
    direction_id: int
    eps: float
    fd_value: float
    pairing: float
    abs_err: float


@dataclass
class GradientCheckReport:
    base_value: float
    gradient: np.ndarray
    rows: list
    orders: list  # per-direction observed convergence order
    observed_order: float  # worst direction


def fd_gradient_check(problem, tg, y0, directions, eps_list, cfg=None):
    """Central-difference check of the value gradient.

    Each row compares (V(y0 + eps d) - V(y0 - eps d)) / (2 eps) against the
    Y-pairing of the reported gradient with d. Perturbed solves warm-start
    from the base control so all values sit on the same local branch.
    """
    y0 = np.asarray(y0, dtype=float).ravel()
    base = _solve(problem, tg, y0, cfg)
    grad = value_gradient(problem, tg, y0, triple=base)
    warm = base.ubar.values
    rows = []
    orders = []
    eps_sorted = sorted(float(e) for e in eps_list)
    if any(e <= 0.0 for e in eps_sorted):
        raise ConfigError("eps_list entries must be positive")
    for d_id, direction in enumerate(directions):
        d = np.asarray(direction, dtype=float).ravel()
        if d.shape != y0.shape:
            raise DimensionMismatch(
                f"direction {d_id} has shape {d.shape}, expected {y0.shape}"
            )
        pairing = inner_y(problem.grid, grad, d)
        errors = []
        for eps in eps_sorted:
            plus = _solve(problem, tg, y0 + eps * d, cfg, warm=warm)
            minus = _solve(problem, tg, y0 - eps * d, cfg, warm=warm)
            fd = (plus.cost - minus.cost) / (2.0 * eps)
            err = abs(fd - pairing)
            rows.append(GradientCheckRow(d_id, eps, fd, pairing, err))
            errors.append(err)
        order = math.inf
        for i in range(len(eps_sorted) - 1):
            e_small, e_large = errors[i], errors[i + 1]
            if e_large <= 0.0:
                continue
            if e_small <= 0.0:
                continue
            order = min(
                order,
                math.log(e_large / e_small)
                / math.log(eps_sorted[i + 1] / eps_sorted[i]),
            )
        orders.append(order)
    observed = min(orders) if orders else math.inf
    return GradientCheckReport(
        base_value=base.cost, gradient=grad, rows=rows, orders=orders,
        observed_order=observed,
    )


# ---------------------------------------------------------------------------
# stability of the solution map in the initial state


@dataclass
class LipschitzRow:
    pair_id: int
    norm_dy0: float
    norm_ddelta: float
    ratio: float


@dataclass
class LipschitzReport:
    max_ratio: float
    radius: float
    rows: list = field(default_factory=list)


def _triple_distance(problem, ta, tb):
    theta = problem.theta
    tg = ta.ybar.tg
    dy = type(ta.ybar)(tg, ta.ybar.values - tb.ybar.values)
    du = type(ta.ubar)(tg, ta.ubar.values - tb.ubar.values)
    dp = type(ta.pbar)(tg, ta.pbar.values - tb.pbar.values)
    return (
        trajectory_norm(problem.grid, dy, "winf", theta=theta)
        + trajectory_norm(problem.grid, du, "l2_y", theta=theta)
        + trajectory_norm(problem.grid, du, "sup_y", theta=theta)
        + trajectory_norm(problem.grid, dp, "winf", theta=theta)
    )


def lipschitz_probe(problem, tg, y0, n_samples=50, radius=1e-3, seed=0,
                    cfg=None, map_fn=map):
    """Sampled Lipschitz ratios of y0 -> (state, control, adjoint).

    Pairs of initial states are drawn in the Y-ball of the given radius
    around y0; every solve warm-starts from the base control so ratios
    measure one solution branch. All draws happen before any solve, so a
    parallel order-preserving map_fn changes nothing in the output.
    """
    y0 = np.asarray(y0, dtype=float).ravel()
    base = _solve(problem, tg, y0, cfg)
    warm = base.ubar.values
    rng = np.random.default_rng(seed)
    pairs = []
    for pair in range(int(n_samples)):
        da = rng.standard_normal(y0.shape)
        db = rng.standard_normal(y0.shape)
        da *= radius * rng.uniform(0.1, 1.0) / max(norm_y(problem.grid, da), 1e-300)
        db *= radius * rng.uniform(0.1, 1.0) / max(norm_y(problem.grid, db), 1e-300)
        pairs.append((pair, da, db))

    def one_pair(item):
        pair, da, db = item
        dy0 = norm_y(problem.grid, da - db)
        if dy0 <= 1e-15 * max(1.0, radius):
            return None
        ta = _solve(problem, tg, y0 + da, cfg, warm=warm)
        tb = _solve(problem, tg, y0 + db, cfg, warm=warm)
        ddelta = _triple_distance(problem, ta, tb)
        return LipschitzRow(pair, dy0, ddelta, ddelta / dy0)

    rows = [row for row in map_fn(one_pair, pairs) if row is not None]
    max_ratio = max((row.ratio for row in rows), default=0.0)
    return LipschitzReport(max_ratio=max_ratio, radius=radius, rows=rows)


# ---------------------------------------------------------------------------
# dynamic-programming split


@dataclass
class DpReport:
    value_full: float
    head_cost: float
    tail_value: float
    value_split: float
    gap: float
    split_index: int
    tau: float


def dynamic_programming_check(problem, tg, y0, tau, cfg=None):
    """Compare V(y0) against head cost plus tail value at time tau.

    The split node weights recombine to the full-horizon rule exactly at
    every theta, so the gap measures solver tolerance only. The tail solve
    warm-starts from the restriction of the full-horizon control.
    """
    y0 = np.asarray(y0, dtype=float).ravel()
    split = int(round(tau / tg.dt))
    if split <= 0 or split >= tg.n_steps:
        raise ConfigError(
            f"split time {tau} must lie strictly inside the horizon"
        )
    full = _solve(problem, tg, y0, cfg)
    c_head = node_weights(split, problem.theta)
    h, dt = problem.grid.h, tg.dt
    y_head = full.ybar.values[: split + 1]
    u_head = full.ubar.values[:split]
    head = 0.5 * dt * h * (
        float(c_head @ np.sum(y_head * y_head, axis=1))
        + problem.alpha * float(np.sum(u_head * u_head))
    )
    tail_tg = TimeGrid(tg.n_steps - split, tg.horizon - split * tg.dt)
    tail = _solve(
        problem, tail_tg, full.ybar.values[split], cfg,
        warm=full.ubar.values[split:],
    )
    value_split = head + tail.cost
    return DpReport(
        value_full=full.cost, head_cost=head, tail_value=tail.cost,
        value_split=value_split, gap=abs(full.cost - value_split),
        split_index=split, tau=split * tg.dt,
    )


# ---------------------------------------------------------------------------
# pointwise certificates


def optimal_feedback(problem, gradient):
    """Instantaneous minimizer P(-(1/alpha) B* g) of the HJB Hamiltonian."""
    g = np.asarray(gradient, dtype=float).ravel()
    raw = -problem.b_adjoint(g[None, :]) / problem.alpha
    return project_control(problem.grid, raw, problem.eta)[0]


def hjb_residual(problem, y0, gradient):
    """Absolute residual of the stationary HJB equation at y0.

    |<g, A y0 + f(y0)>_Y + (1/2)|y0|^2_Y + (alpha/2)|u*|^2_U + <B* g, u*>_U|
    with u* the projected instantaneous feedback.
    """
    y0 = np.asarray(y0, dtype=float).ravel()
    g = np.asarray(gradient, dtype=float).ravel()
    if g.shape != y0.shape:
        raise DimensionMismatch(
            f"gradient shape {g.shape} does not match state shape {y0.shape}"
        )
    h = problem.grid.h
    drift = problem.op.apply(y0[None, :])[0] + problem.nl.f(y0[None, :])[0]
    u_star = optimal_feedback(problem, g)
    bstar_g = problem.b_adjoint(g[None, :])[0]
    residual = (
        inner_y(problem.grid, g, drift)
        + 0.5 * norm_y(problem.grid, y0) ** 2
        + 0.5 * problem.alpha * h * float(u_star @ u_star)
        + h * float(bstar_g @ u_star)
    )
    return abs(residual)


def feedback_consistency(problem, tg, y0, cfg=None, triple=None):
    """U-distance between the first optimal control interval and the
    feedback induced by the value gradient; zero to solver tolerance when
    the scheme weights the implicit side fully (theta = 1)."""
    if triple is None:
        triple = _solve(problem, tg, np.asarray(y0, dtype=float).ravel(), cfg)
    grad = value_gradient(problem, tg, y0, triple=triple)
    fb = optimal_feedback(problem, grad)
    diff = triple.ubar.values[0] - fb
    return math.sqrt(problem.grid.h * float(diff @ diff))
