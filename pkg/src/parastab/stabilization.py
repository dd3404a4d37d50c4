"""Stabilizing feedback gains, constrained closed-loop simulation, and
sampled estimates of the smallness radii used by the existence theory.

The radius formula is min{1/(4 C M_K^2), eta/(2 M_K |K| |E|)} with C the
sampled slope of the nonlinearity on the unit trajectory ball, M_K the
closed-loop input-to-trajectory gain, and |E| the trajectory-to-sup
embedding constant. All constants are sampled lower bounds, never
certified suprema.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import (
    ConfigError,
    DimensionMismatch,
    FitUnreliable,
    NonlinearStepDivergence,
    NotStabilizable,
)
from .pde_core import (
    ControlTrajectory,
    DiscreteOperator,
    StateTrajectory,
    build_time_grid,
    eigenmode_vector,
    interval_source_norm,
    make_nonlinearity,
    norm_y,
    solve_state,
    tail_decay_fit,
    trajectory_norm,
)

_ADMISSIBLE_SLACK = 1e-12


def spectral_abscissa(op):
    """Largest real part of the spectrum of an operator or matrix."""
    if isinstance(op, DiscreteOperator):
        return float(np.max(op.eigenvalues()))
    a = np.atleast_2d(np.asarray(op, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"abscissa needs a square matrix, got {a.shape}")
    return float(np.max(np.linalg.eigvals(a).real))


@dataclass(frozen=True)
class FeedbackGain:
    matrix: np.ndarray  # (m, n), control = -K y
    method: str  # zero | shift | riccati
    abscissa: float  # closed-loop spectral abscissa, negative by construction


def build_feedback_gain(a, b, method="zero", alpha=1.0, margin=0.5, weight=None):
    """Construct K with a stable closed loop A - B K, or raise.

    zero: K = 0, valid only when A is already stable. shift: K = kappa B^+
    with kappa = abscissa(A) + margin. riccati: K = (1/alpha) B^T P from the
    algebraic Riccati solve.
    """
    a_dense = a.dense() if isinstance(a, DiscreteOperator) else np.atleast_2d(
        np.asarray(a, dtype=float)
    )
    n = a_dense.shape[0]
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if b.shape[0] != n:
        raise DimensionMismatch(f"B has {b.shape[0]} rows, operator has {n}")
    open_margin = spectral_abscissa(a_dense)
    if method == "zero":
        k = np.zeros((b.shape[1], n))
    elif method == "shift":
        kappa = open_margin + margin
        k = kappa * np.linalg.pinv(b)
    elif method == "riccati":
        from .oracle import solve_riccati

        w = np.eye(n) if weight is None else np.asarray(weight, dtype=float)
        sol = solve_riccati(a_dense, b, alpha, w)
        k = sol.k_lqr
    else:
        raise ConfigError(f"unknown gain method {method!r}")
    closed = float(np.max(np.linalg.eigvals(a_dense - b @ k).real))
    if closed >= 0.0:
        raise NotStabilizable(
            f"method {method!r} leaves closed-loop abscissa {closed:.3e}",
            abscissa=closed,
        )
    return FeedbackGain(matrix=k, method=method, abscissa=closed)


def _dense_march(a_cl, problem, tg, y0, sources=None):
    """theta-scheme march of y' = A_cl y + f(y) + src with a dense matrix.

    One LU factorization of the implicit matrix; the nonlinear term is
    handled by simplified Newton on the full step residual.
    """
    dt, theta = tg.dt, problem.theta
    n = a_cl.shape[0]
    nl = problem.nl
    lu = scipy.linalg.lu_factor(np.eye(n) - dt * theta * a_cl)
    out = np.empty((tg.n_steps + 1, n))
    out[0] = np.asarray(y0, dtype=float).ravel()
    for k in range(tg.n_steps):
        yk = out[k]
        b = yk + dt * (1.0 - theta) * (a_cl @ yk + nl.f(yk))
        if sources is not None:
            b = b + dt * sources[k]
        z = scipy.linalg.lu_solve(lu, b)
        if not nl.is_linear:
            scale = max(1.0, float(np.max(np.abs(b))))
            for _ in range(8 * problem.max_newton):
                res = z - dt * theta * (a_cl @ z + nl.f(z)) - b
                res_norm = float(np.max(np.abs(res)))
                if res_norm <= problem.tol_step * scale:
                    break
                if not np.isfinite(res_norm) or res_norm > 1e12 * scale:
                    raise NonlinearStepDivergence(
                        f"closed-loop state blew up in step {k}",
                        step_index=k, time=tg.t[k + 1], residual=res_norm,
                    )
                z = z - scipy.linalg.lu_solve(lu, res)
            else:
                raise NonlinearStepDivergence(
                    f"closed-loop step {k} did not converge",
                    step_index=k, time=tg.t[k + 1], residual=res_norm,
                )
        out[k + 1] = z
    return out


def closed_loop_simulate(problem, y0, gain, tg):
    """Simulate y' = (A - B K) y + f(y); record u = -K y and admissibility.

    The control is sampled at the scheme's own interval point,
    u_k = -K (theta y_{k+1} + (1-theta) y_k), so feeding the recorded u back
    through solve_state reproduces the trajectory step by step.
    """
    k_mat = gain.matrix if isinstance(gain, FeedbackGain) else np.atleast_2d(gain)
    a_cl = problem.op.dense() - problem.b_dense @ k_mat
    values = _dense_march(a_cl, problem, tg, y0)
    theta = problem.theta
    u = -(theta * values[1:] + (1.0 - theta) * values[:-1]) @ k_mat.T
    state = StateTrajectory(tg, values)
    control = ControlTrajectory(tg, u)
    sup_u = max(
        (norm_y(problem.grid, u[k]) for k in range(tg.n_steps)), default=0.0
    )
    admissible = bool(sup_u <= problem.eta * (1.0 + _ADMISSIBLE_SLACK))
    return state, control, admissible


@dataclass
class SmallnessReport:
    C: float
    M_K: float
    norm_K: float
    norm_embed: float
    radius_stability: float
    radius_admissibility: float
    radius: float
    samples: int


def estimate_smallness(problem, gain, tg, n_samples=24, seed=0):
    """Sample the constants of the smallness radius formula.

    M_K and the embedding constant come from linear closed-loop responses to
    (y0, source) inputs; C comes from nonlinearity differences over pairs of
    trajectories scaled into the unit ball. Deterministic eigenmode samples
    are always included, the rest are seeded.
    """
    if n_samples < 2:
        raise ConfigError("smallness estimate needs at least 2 samples")
    k_mat = gain.matrix if isinstance(gain, FeedbackGain) else np.atleast_2d(gain)
    grid = problem.grid
    n = problem.n
    a_cl = problem.op.dense() - problem.b_dense @ k_mat
    rng = np.random.default_rng(seed)
    linearized = replace(problem, nl=make_nonlinearity("linear"))

    trajectories = []
    m_k, norm_embed = 0.0, 0.0
    for i in range(n_samples):
        if i < min(n, 3):
            y0 = eigenmode_vector(grid, i + 1, 1.0)
            src = None
        else:
            y0 = rng.standard_normal(n)
            src = rng.standard_normal((tg.n_steps, n)) * math.exp(
                -float(i) / n_samples
            )
        values = _dense_march(a_cl, linearized, tg, y0, sources=src)
        traj = StateTrajectory(tg, values)
        out_norm = trajectory_norm(grid, traj, "winf", theta=problem.theta)
        in_norm = norm_y(grid, y0)
        if src is not None:
            in_norm += interval_source_norm(grid, src, tg.dt, weight="vstar")
        if in_norm > 0.0:
            m_k = max(m_k, out_norm / in_norm)
        sup_norm = trajectory_norm(grid, traj, "sup_y", theta=problem.theta)
        if out_norm > 0.0:
            norm_embed = max(norm_embed, sup_norm / out_norm)
        if out_norm > 0.0:
            ball_scale = rng.uniform(0.2, 1.0) / out_norm
            trajectories.append(values * ball_scale)

    c_est = 0.0
    if not problem.nl.is_linear:
        for i in range(len(trajectories)):
            for j in range(i + 1, len(trajectories)):
                ya, yb = trajectories[i], trajectories[j]
                diff = StateTrajectory(tg, ya - yb)
                denom = trajectory_norm(grid, diff, "winf", theta=problem.theta)
                if denom <= 0.0:
                    continue
                fdiff = StateTrajectory(tg, problem.nl.f(ya) - problem.nl.f(yb))
                num = trajectory_norm(
                    grid, fdiff, "l2_vstar", theta=problem.theta
                )
                c_est = max(c_est, num / denom)

    norm_k = float(np.linalg.norm(k_mat, 2)) if k_mat.size else 0.0
    radius_stability = math.inf if c_est == 0.0 else 1.0 / (4.0 * c_est * m_k**2)
    if math.isinf(problem.eta):
        radius_admissibility = math.inf
    elif norm_k == 0.0:
        radius_admissibility = math.inf
    else:
        radius_admissibility = problem.eta / (2.0 * m_k * norm_k * norm_embed)
    return SmallnessReport(
        C=c_est,
        M_K=m_k,
        norm_K=norm_k,
        norm_embed=norm_embed,
        radius_stability=radius_stability,
        radius_admissibility=radius_admissibility,
        radius=min(radius_stability, radius_admissibility),
        samples=n_samples,
    )


def resolve_horizon(problem, y0, tail_tol=1e-6, initial_horizon=2.0,
                    dt_target=1e-2, n_steps_cap=4096, max_doublings=8):
    """Pick T so the fitted uncontrolled tail obeys C e^{-omega T} below
    tail_tol * |y0|_Y, doubling T (and re-solving) until satisfied.

    Returns (TimeGrid, TailFit) of the accepted horizon.
    """
    scale = max(norm_y(problem.grid, y0), 1e-30)
    horizon = float(initial_horizon)
    for _ in range(max_doublings + 1):
        n_steps = min(n_steps_cap, max(16, int(round(horizon / dt_target))))
        tg = build_time_grid(horizon, n_steps)
        traj = solve_state(problem, tg, y0)
        try:
            fit = tail_decay_fit(problem.grid, traj)
        except FitUnreliable:
            # tail already at round-off: the horizon is more than enough
            return tg, None
        if fit.rate > 0.0 and fit.amplitude * math.exp(
            -fit.rate * horizon
        ) <= tail_tol * scale:
            return tg, fit
        horizon *= 2.0
    raise FitUnreliable(f"horizon search failed below tail_tol={tail_tol:g}")
