"""Weighted trajectory norms, quadrature weights, and the tail decay fit."""

import math

import numpy as np
import pytest

from parastab import (
    ControlTrajectory,
    StateTrajectory,
    build_grid,
    build_time_grid,
    eigenmode_vector,
    interval_source_norm,
    make_problem,
    node_weights,
    norm_at,
    solve_state,
    tail_decay_fit,
    trajectory_norm,
)
from parastab.errors import ConfigError, FitUnreliable
from parastab.pde_core.norms import norm_v, norm_vstar, norm_y


def _constant_state(grid, tg, vec):
    return StateTrajectory(tg, np.tile(vec, (tg.n_steps + 1, 1)))


def test_node_weights_values_and_sum():
    c = node_weights(4, 1.0)
    assert np.array_equal(c, [0.0, 1.0, 1.0, 1.0, 1.0])
    c = node_weights(4, 0.5)
    assert np.array_equal(c, [0.5, 1.0, 1.0, 1.0, 0.5])
    for theta in (0.5, 1.0):
        assert node_weights(7, theta).sum() == 7.0, "weights must sum to n_steps"


def test_constant_sine_mode_squared_norm_is_half():
    # y(t, x) = sin(pi x) on unit length and horizon: discrete quadrature
    # gives ||y||^2 = 1/2 exactly at every resolution and both schemes
    for n, n_steps, theta in ((7, 5, 1.0), (31, 12, 0.5)):
        g = build_grid(n, 1.0)
        tg = build_time_grid(1.0, n_steps)
        traj = _constant_state(g, tg, eigenmode_vector(g, 1))
        val = trajectory_norm(g, traj, "l2_y", theta=theta) ** 2
        assert math.isclose(val, 0.5, rel_tol=1e-13), (
            f"n={n} steps={n_steps} theta={theta}: got {val}"
        )


def test_state_norm_matches_weighted_sum():
    g = build_grid(5, 1.0)
    tg = build_time_grid(2.0, 4)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((5, 5))
    traj = StateTrajectory(tg, vals)
    theta = 0.5
    c = node_weights(4, theta)
    want = math.sqrt(tg.dt * sum(c[j] * g.h * vals[j] @ vals[j] for j in range(5)))
    got = trajectory_norm(g, traj, "l2_y", theta=theta)
    assert math.isclose(got, want, rel_tol=1e-13)


def test_control_norm_uses_interval_rule():
    g = build_grid(3, 1.0)
    tg = build_time_grid(1.0, 4)
    vals = np.ones((4, 3))
    traj = ControlTrajectory(tg, vals)
    want = math.sqrt(tg.dt * 4 * g.h * 3.0)
    assert math.isclose(trajectory_norm(g, traj, "l2_y"), want, rel_tol=1e-14)
    assert math.isclose(trajectory_norm(g, traj, "sup_y"), math.sqrt(g.h * 3.0), rel_tol=1e-14)
    with pytest.raises(ConfigError):
        trajectory_norm(g, traj, "winf")


def test_seminorm_and_dual_norm_duality():
    # |v|_V and |v|_V* are dual: <a, b>_Y <= |a|_V* |b|_V with equality
    # when b solves the stencil problem for a
    g = build_grid(9, 1.0)
    rng = np.random.default_rng(1)
    a = rng.standard_normal(9)
    from parastab import neg_laplacian_solve

    b = neg_laplacian_solve(g, a)
    lhs = g.h * float(a @ b)
    assert math.isclose(lhs, norm_vstar(g, a) ** 2, rel_tol=1e-10)
    assert math.isclose(norm_v(g, b) ** 2, norm_vstar(g, a) ** 2, rel_tol=1e-10)


def test_triangle_inequality_all_kinds():
    g = build_grid(6, 1.0)
    tg = build_time_grid(1.0, 5)
    rng = np.random.default_rng(2)
    a = StateTrajectory(tg, rng.standard_normal((6, 6)))
    b = StateTrajectory(tg, rng.standard_normal((6, 6)))
    ab = StateTrajectory(tg, a.values + b.values)
    for kind in ("l2_y", "l2_v", "l2_vstar", "winf", "sup_y"):
        na = trajectory_norm(g, a, kind, theta=0.5)
        nb = trajectory_norm(g, b, kind, theta=0.5)
        nab = trajectory_norm(g, ab, kind, theta=0.5)
        assert nab <= na + nb + 1e-12, f"triangle inequality fails for {kind}"


def test_winf_combines_gradient_and_rate_parts():
    g = build_grid(4, 1.0)
    tg = build_time_grid(1.0, 3)
    rng = np.random.default_rng(3)
    vals = rng.standard_normal((4, 4))
    traj = StateTrajectory(tg, vals)
    grad = trajectory_norm(g, traj, "l2_v", theta=1.0) ** 2
    dq = np.diff(vals, axis=0) / tg.dt
    rate = interval_source_norm(g, dq, tg.dt, weight="vstar") ** 2
    want = math.sqrt(grad + rate)
    assert math.isclose(trajectory_norm(g, traj, "winf"), want, rel_tol=1e-12)


def test_interval_source_norm_weights():
    g = build_grid(3, 1.0)
    src = np.ones((2, 3))
    dt = 0.5
    got = interval_source_norm(g, src, dt, weight="y")
    assert math.isclose(got, math.sqrt(dt * 2 * g.h * 3.0), rel_tol=1e-14)
    with pytest.raises(ConfigError):
        interval_source_norm(g, src, dt, weight="h1")


def test_norm_at_reads_single_node():
    g = build_grid(3, 1.0)
    tg = build_time_grid(1.0, 2)
    vals = np.array([[1.0, 0, 0], [0, 2.0, 0], [0, 0, 3.0]])
    traj = StateTrajectory(tg, vals)
    assert math.isclose(norm_at(g, traj, 2), math.sqrt(g.h * 9.0), rel_tol=1e-14)


def test_tail_fit_recovers_pure_exponential():
    g = build_grid(4, 1.0)
    tg = build_time_grid(5.0, 200)
    mode = eigenmode_vector(g, 1)
    vals = 3.0 * np.exp(-2.0 * tg.t)[:, None] * mode[None, :]
    fit = tail_decay_fit(g, StateTrajectory(tg, vals))
    assert abs(fit.rate - 2.0) <= 1e-6, f"fitted rate {fit.rate} should be 2"
    assert fit.rms <= 1e-10, f"pure exponential should fit exactly, rms {fit.rms}"
    assert math.isclose(fit.amplitude, 3.0 * norm_y(g, mode), rel_tol=1e-6)
    assert fit.window[1] == 5.0


def test_tail_fit_explicit_window():
    g = build_grid(2, 1.0)
    tg = build_time_grid(4.0, 80)
    vals = np.exp(-1.5 * tg.t)[:, None] * np.ones((1, 2))
    fit = tail_decay_fit(g, StateTrajectory(tg, vals), window=(1.0, 3.0))
    assert abs(fit.rate - 1.5) <= 1e-9
    assert fit.window == (1.0, 3.0)


def test_tail_fit_matches_scheme_decay_of_heat_mode():
    # simulated first mode decays geometrically with the scheme's own step
    # factor; the fit must recover exactly that rate, which in turn sits
    # near the continuous value pi^2 - shift
    shift = 1.0
    problem = make_problem(kind="linear", n_interior=63, shift=shift, theta=1.0)
    g = problem.grid
    lam = problem.op.eigenvalues()[0]
    tg = build_time_grid(0.5, 500)
    y0 = eigenmode_vector(g, 1, amplitude=0.1)
    traj = solve_state(problem, tg, y0)
    fit = tail_decay_fit(g, traj)
    # backward step multiplies the mode by 1/(1 - dt lam) each step
    scheme_rate = math.log(1.0 - tg.dt * lam) / tg.dt
    assert abs(fit.rate - scheme_rate) <= 1e-8, (
        f"fit {fit.rate} vs scheme rate {scheme_rate}"
    )
    assert abs(fit.rate - (math.pi**2 - shift)) <= 0.1, (
        f"rate {fit.rate} should approximate pi^2 - shift = {math.pi**2 - shift}"
    )


def test_tail_fit_rejects_zero_trajectory():
    g = build_grid(3, 1.0)
    tg = build_time_grid(1.0, 10)
    traj = StateTrajectory(tg, np.zeros((11, 3)))
    with pytest.raises(FitUnreliable):
        tail_decay_fit(g, traj)


def test_tail_fit_window_validation():
    g = build_grid(3, 1.0)
    tg = build_time_grid(1.0, 10)
    traj = StateTrajectory(tg, np.ones((11, 3)))
    with pytest.raises(ConfigError):
        tail_decay_fit(g, traj, window_fraction=0.0)
    with pytest.raises(FitUnreliable):
        tail_decay_fit(g, traj, window=(0.95, 1.0))
