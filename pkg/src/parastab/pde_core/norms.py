"""Weighted inner products, trajectory norms, and the tail decay fit.

Spatial pairings carry the mesh weight h (lumped mass), so <a, b>_Y =
h * a.b. The control space uses the same weight; with the identity input
map the two spaces coincide. The H1_0 seminorm is realized through the
stencil, |v|_V^2 = <(-Lap_h) v, v>_Y, and its dual through one solve with
(-Lap_h)^{-1}. Time quadrature matches the theta scheme: state-like node
sums use weights dt * c_j with c_j = 1 for 1 <= j < N and c_N = theta;
interval sums (controls, difference quotients) use plain dt. This is the
same quadrature the tracking cost uses, which keeps the energy identities
of the discrete optimality system exact.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, FitUnreliable
from .operators import DiscreteOperator, neg_laplacian_solve

TRAJECTORY_NORM_KINDS = ("l2_y", "l2_v", "l2_vstar", "winf", "sup_y")


def inner_y(grid, a, b):
    return grid.h * float(np.dot(np.ravel(a), np.ravel(b)))


def norm_y(grid, a):
    return math.sqrt(max(inner_y(grid, a, a), 0.0))


inner_u = inner_y
norm_u = norm_y


def norm_v(grid, a):
    op = DiscreteOperator(grid, 0.0)
    return math.sqrt(max(-inner_y(grid, op.apply(a), a), 0.0))


def norm_vstar(grid, a):
    w = neg_laplacian_solve(grid, a)
    return math.sqrt(max(inner_y(grid, a, w), 0.0))


def node_weights(n_steps, theta):
    """Quadrature weights c_0..c_N for node sums (without the dt factor).

    Matches the time scheme: sum_k dt [theta*phi_{k+1} + (1-theta)*phi_k],
    so c_0 = 1-theta, interior weights 1, c_N = theta. Trapezoid at
    theta = 1/2, right endpoint at theta = 1.
    """
    c = np.ones(n_steps + 1)
    c[0] = 1.0 - theta
    c[-1] = theta
    return c


def _node_sq(grid, values, weight_op=None):
    """Per-node squared norms |y_j|^2 for j = 0..N of a node trajectory."""
    v = values
    if weight_op is None:
        return grid.h * np.sum(v * v, axis=1)
    if weight_op == "v":
        op = DiscreteOperator(grid, 0.0)
        return -grid.h * np.sum(op.apply(v) * v, axis=1)
    if weight_op == "vstar":
        w = neg_laplacian_solve(grid, v)
        return grid.h * np.sum(v * w, axis=1)
    raise ConfigError(f"unknown weight {weight_op!r}")


def trajectory_norm(grid, traj, kind, theta=1.0):
    """Norm of a trajectory. State/adjoint kinds: l2_y, l2_v, l2_vstar,
    winf, sup_y. Controls: l2_y (interval rule) and sup_y."""
    dt = traj.tg.dt
    vals = traj.values
    if traj.kind == "control":
        per = grid.h * np.sum(vals * vals, axis=1)
        if kind == "l2_y":
            return math.sqrt(max(dt * float(np.sum(per)), 0.0))
        if kind == "sup_y":
            return math.sqrt(max(float(np.max(per)), 0.0))
        raise ConfigError(f"norm kind {kind!r} undefined for controls")
    c = node_weights(traj.tg.n_steps, theta)
    if kind == "l2_y":
        return math.sqrt(max(dt * float(c @ _node_sq(grid, vals)), 0.0))
    if kind == "l2_v":
        return math.sqrt(max(dt * float(c @ _node_sq(grid, vals, "v")), 0.0))
    if kind == "l2_vstar":
        return math.sqrt(max(dt * float(c @ _node_sq(grid, vals, "vstar")), 0.0))
    if kind == "sup_y":
        return max(norm_y(grid, vals[k]) for k in range(vals.shape[0]))
    if kind == "winf":
        grad_part = dt * float(c @ _node_sq(grid, vals, "v"))
        dq = np.diff(vals, axis=0) / dt
        w = neg_laplacian_solve(grid, dq)
        rate_part = dt * grid.h * float(np.sum(dq * w))
        return math.sqrt(max(grad_part + rate_part, 0.0))
    raise ConfigError(f"unknown trajectory norm kind {kind!r}")


def norm_at(grid, traj, node):
    return norm_y(grid, traj.values[node])


def interval_source_norm(grid, source, dt, weight="vstar"):
    """L2(I; V*) norm of an interval-constant source array (N, n)."""
    source = np.atleast_2d(np.asarray(source, dtype=float))
    if weight == "vstar":
        w = neg_laplacian_solve(grid, source)
    elif weight == "y":
        w = source
    else:
        raise ConfigError(f"unknown weight {weight!r}")
    return math.sqrt(max(dt * grid.h * float(np.sum(source * w)), 0.0))


@dataclass
class TailFit:
    amplitude: float  # C in |y(t)|_Y ~ C exp(-omega t)
    rate: float  # omega
    rms: float  # residual of the log-linear fit
    window: tuple  # (t_first, t_last) of the fitted nodes


def tail_decay_fit(grid, traj, window_fraction=0.5, window=None):
    """Least-squares fit of log |y(t)|_Y ~ log C - omega t on the tail window.

    The window is either the trailing fraction of the horizon or an explicit
    (t_a, t_b) pair. Raises FitUnreliable when the window has fewer than
    three nodes or any norm sits at the round-off floor.
    """
    if not 0.0 < window_fraction <= 1.0:
        raise ConfigError("window_fraction must lie in (0, 1]")
    t = traj.tg.t
    norms = np.array([norm_y(grid, traj.values[k]) for k in range(len(t))])
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
    else:
        mask = t >= (1.0 - window_fraction) * traj.tg.horizon
    tw, nw = t[mask], norms[mask]
    if len(tw) < 3:
        raise FitUnreliable(f"tail window has {len(tw)} nodes, need >= 3")
    floor = 1e-14 * max(1.0, float(np.max(norms)))
    if np.any(nw <= floor) or not np.all(np.isfinite(nw)):
        raise FitUnreliable("tail norms at or below round-off floor")
    a = np.vstack([np.ones_like(tw), -tw]).T
    coef, *_ = np.linalg.lstsq(a, np.log(nw), rcond=None)
    log_c, omega = float(coef[0]), float(coef[1])
    resid = np.log(nw) - a @ coef
    rms = math.sqrt(float(np.mean(resid**2)))
    return TailFit(math.exp(log_c), omega, rms, (float(tw[0]), float(tw[-1])))
