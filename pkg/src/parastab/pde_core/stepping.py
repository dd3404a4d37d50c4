"""Time stepping: forward state march, its exact linearization, and the
transpose (adjoint) backward march.

Scheme on y' = A y + f(y) + r with interval-constant r_k:

    y_{k+1} = y_k + dt [theta (A y_{k+1} + f(y_{k+1}))
                        + (1-theta) (A y_k + f(y_k)) + r_k]

The backward solver is the exact algebraic transpose of this march, so
node-level stationarity identities hold to round-off, not just to the
discretization order.
"""

import numpy as np

from ..errors import DimensionMismatch, NonlinearStepDivergence
from .norms import node_weights
from .operators import solve_shifted
from .trajectory import AdjointTrajectory, ControlTrajectory, StateTrajectory

# relative residual growth allowed before a Newton step counts as divergence
_BLOWUP = 1e12


def _interval_rhs(problem, tg, controls, extra_sources):
    """Stack the interval forcing r_k = B u_k + q_k, shape (N, n)."""
    n_steps = tg.n_steps
    r = np.zeros((n_steps, problem.n))
    if controls is not None:
        u = controls.values if isinstance(controls, ControlTrajectory) else controls
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape != (n_steps, problem.m):
            raise DimensionMismatch(
                f"controls must have shape ({n_steps}, {problem.m}), got {u.shape}"
            )
        r += problem.b_apply(u)
    if extra_sources is not None:
        q = np.atleast_2d(np.asarray(extra_sources, dtype=float))
        if q.shape != (n_steps, problem.n):
            raise DimensionMismatch(
                f"sources must have shape ({n_steps}, {problem.n}), got {q.shape}"
            )
        r += q
    return r


def _linear_forward(problem, tg, y0, rhs):
    """Eigenbasis scan for f == 0; rhs has shape (N, n)."""
    dt, theta = tg.dt, problem.theta
    lam, q = problem.op.eigenbasis()
    gain = (1.0 + dt * (1.0 - theta) * lam) / (1.0 - dt * theta * lam)
    feed = dt * (rhs @ q) / (1.0 - dt * theta * lam)
    out = np.empty((tg.n_steps + 1, problem.n))
    out[0] = y0 @ q
    for k in range(tg.n_steps):
        out[k + 1] = gain * out[k] + feed[k]
    return out @ q.T


def _linear_backward(problem, tg, terminal, sources):
    """Eigenbasis scan for the transpose march; sources rows 1..N are used."""
    dt, theta = tg.dt, problem.theta
    lam, q = problem.op.eigenbasis()
    gain = (1.0 + dt * (1.0 - theta) * lam) / (1.0 - dt * theta * lam)
    feed = dt * (sources @ q) / (1.0 - dt * theta * lam)
    out = np.empty((tg.n_steps + 1, problem.n))
    out[-1] = terminal @ q
    for j in range(tg.n_steps, 0, -1):
        out[j - 1] = gain * out[j] - feed[j]
    return out @ q.T


def _newton_step(problem, tg, y_prev, r_k, k):
    """Solve z = b + dt*theta*(A z + f(z)) for one implicit step.

    Newton first; if the budget runs out, fall back to the fixed-point
    iteration z <- (I - dt*theta*A)^{-1} (b + dt*theta*f(z)). Divergence is
    surfaced, never masked.
    """
    dt, theta = tg.dt, problem.theta
    op, nl = problem.op, problem.nl
    b = y_prev + dt * (1.0 - theta) * (op.apply(y_prev) + nl.f(y_prev)) + dt * r_k
    sigma = 1.0 / (dt * theta)
    scale = max(1.0, float(np.max(np.abs(b))))
    tol = problem.tol_step * scale

    def residual(v):
        return v - dt * theta * (op.apply(v) + nl.f(v)) - b

    z = y_prev.copy()
    res = residual(z)
    res_norm = float(np.max(np.abs(res)))
    for _ in range(problem.max_newton):
        if res_norm <= tol:
            return z
        delta = solve_shifted(op, sigma, -res / (dt * theta), extra_diag=nl.fp(z))
        step = 1.0
        for _ in range(30):
            trial = z + step * delta
            res_t = residual(trial)
            trial_norm = float(np.max(np.abs(res_t)))
            if np.isfinite(trial_norm) and trial_norm < res_norm:
                break
            step *= 0.5
        else:
            break
        z, res, res_norm = trial, res_t, trial_norm
        if res_norm > _BLOWUP * scale:
            raise NonlinearStepDivergence(
                f"state blew up in step {k} at t={tg.t[k + 1]:.6g}",
                step_index=k, time=tg.t[k + 1], residual=res_norm,
            )
    for _ in range(4 * problem.max_newton):
        if res_norm <= tol:
            return z
        z = solve_shifted(op, sigma, (b + dt * theta * nl.f(z)) / (dt * theta))
        res = residual(z)
        res_norm = float(np.max(np.abs(res)))
        if not np.isfinite(res_norm) or res_norm > _BLOWUP * scale:
            break
    if res_norm <= tol:
        return z
    raise NonlinearStepDivergence(
        f"implicit step {k} did not converge (residual {res_norm:.3e})",
        step_index=k, time=tg.t[k + 1], residual=res_norm,
    )


def solve_state(problem, tg, y0, controls=None, extra_sources=None):
    """March the semilinear dynamics forward from y0.

    controls: ControlTrajectory or (N, m) array, one value per interval.
    extra_sources: (N, n) interval forcing added to B u.
    """
    y0 = np.asarray(y0, dtype=float).ravel()
    if y0.size != problem.n:
        raise DimensionMismatch(f"y0 must have {problem.n} entries, got {y0.size}")
    if not np.all(np.isfinite(y0)):
        raise DimensionMismatch("y0 must be finite")
    rhs = _interval_rhs(problem, tg, controls, extra_sources)
    if problem.nl.is_linear:
        return StateTrajectory(tg, _linear_forward(problem, tg, y0, rhs))
    out = np.empty((tg.n_steps + 1, problem.n))
    out[0] = y0
    for k in range(tg.n_steps):
        out[k + 1] = _newton_step(problem, tg, out[k], rhs[k], k)
    return StateTrajectory(tg, out)


def solve_linearized_state(problem, tg, base, controls=None, v0=None,
                           extra_sources=None):
    """March the linearization of the scheme along the base state.

    Exact derivative of solve_state's map: the implicit side carries
    f'(base_{k+1}), the explicit side f'(base_k).
    """
    rhs = _interval_rhs(problem, tg, controls, extra_sources)
    start = np.zeros(problem.n) if v0 is None else np.asarray(v0, dtype=float).ravel()
    if start.size != problem.n:
        raise DimensionMismatch(f"v0 must have {problem.n} entries, got {start.size}")
    if problem.nl.is_linear:
        return StateTrajectory(tg, _linear_forward(problem, tg, start, rhs))
    dt, theta = tg.dt, problem.theta
    op = problem.op
    fp = problem.nl.fp(base.values)
    sigma = 1.0 / (dt * theta)
    out = np.empty((tg.n_steps + 1, problem.n))
    out[0] = start
    for k in range(tg.n_steps):
        b = out[k] + dt * (1.0 - theta) * (op.apply(out[k]) + fp[k] * out[k]) \
            + dt * rhs[k]
        out[k + 1] = solve_shifted(op, sigma, b / (dt * theta),
                                   extra_diag=fp[k + 1])
    return StateTrajectory(tg, out)


def solve_adjoint_generic(problem, tg, base, nodal_sources, terminal=None):
    """Backward transpose march with raw node sources.

    nodal_sources has shape (N+1, n); rows 1..N drive the recursion

        [I - dt*theta*(A + F'_j)] p_{j-1}
            = [I + dt*(1-theta)*(A + F'_j)] p_j - dt * s_j

    with F'_j = diag(f'(base_j)). Row 0 only pads the indexing.
    """
    s = np.atleast_2d(np.asarray(nodal_sources, dtype=float))
    if s.shape != (tg.n_steps + 1, problem.n):
        raise DimensionMismatch(
            f"sources must have shape ({tg.n_steps + 1}, {problem.n}), got {s.shape}"
        )
    end = np.zeros(problem.n) if terminal is None else np.asarray(terminal, float)
    if problem.nl.is_linear:
        return AdjointTrajectory(tg, _linear_backward(problem, tg, end, s))
    dt, theta = tg.dt, problem.theta
    op = problem.op
    fp = problem.nl.fp(base.values)
    sigma = 1.0 / (dt * theta)
    out = np.empty((tg.n_steps + 1, problem.n))
    out[-1] = end
    for j in range(tg.n_steps, 0, -1):
        b = out[j] + dt * (1.0 - theta) * (op.apply(out[j]) + fp[j] * out[j]) \
            - dt * s[j]
        out[j - 1] = solve_shifted(op, sigma, b / (dt * theta), extra_diag=fp[j])
    return AdjointTrajectory(tg, out)


def solve_adjoint(problem, tg, state):
    """Adjoint of the tracking cost: sources c_j * y_j, zero terminal value."""
    c = node_weights(tg.n_steps, problem.theta)
    return solve_adjoint_generic(problem, tg, state, c[:, None] * state.values)


def initial_covector(problem, tg, base, adjoint):
    """Multiplier of the initial condition, [I + dt*(1-theta)*(A + F'_0)] p_0.

    Equals p_0 at theta = 1. The derivative of any node-source functional
    with respect to y0 is source_0 * c_0 - this covector.
    """
    dt, theta = tg.dt, problem.theta
    p0 = adjoint.values[0]
    if theta == 1.0:
        return p0.copy()
    g0 = problem.op.apply(p0) + problem.nl.fp(base.values[0]) * p0
    return p0 + dt * (1.0 - theta) * g0
