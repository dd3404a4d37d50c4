"""Feedback gains, closed-loop simulation, smallness radii, horizon rule."""

import math

import numpy as np
import pytest

from parastab import (
    DimensionMismatch,
    NonlinearStepDivergence,
    NotStabilizable,
    assemble_operator,
    build_feedback_gain,
    build_grid,
    build_time_grid,
    closed_loop_simulate,
    eigenmode_vector,
    estimate_smallness,
    interval_source_norm,
    make_problem,
    resolve_horizon,
    solve_state,
    tail_decay_fit,
    trajectory_norm,
)
from parastab.errors import ConfigError
from parastab.pde_core.norms import norm_y


def test_abscissa_closed_form_and_matrices():
    from parastab import spectral_abscissa

    op = assemble_operator(build_grid(3, 1.0))
    want = -64.0 * math.sin(math.pi / 8.0) ** 2
    got = spectral_abscissa(op)
    assert math.isclose(got, want, rel_tol=1e-12), f"{got} vs closed form {want}"
    assert abs(got - (-9.37)) < 0.01, "n=3 abscissa should be near -9.37"
    assert spectral_abscissa(np.eye(4)) == 1.0
    with pytest.raises(DimensionMismatch):
        spectral_abscissa(np.zeros((2, 3)))


def test_zero_gain_accepted_on_stable_operator():
    # unit-interval operator with shift 1 stays stable since pi^2 > 1
    problem = make_problem(kind="fisher", n_interior=15, shift=1.0)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="zero")
    assert np.array_equal(gain.matrix, np.zeros((15, 15)))
    assert gain.abscissa < 0.0
    assert math.isclose(gain.abscissa, problem.op.eigenvalues()[0], rel_tol=1e-10)


def test_zero_gain_rejected_on_unstable_operator():
    op = assemble_operator(build_grid(3, 1.0), shift=15.0)
    with pytest.raises(NotStabilizable) as info:
        build_feedback_gain(op, np.eye(3), method="zero")
    assert info.value.abscissa is not None and info.value.abscissa > 0.0


def test_scalar_shift_gain_values():
    gain = build_feedback_gain(np.array([[1.0]]), np.array([[1.0]]),
                               method="shift", margin=0.5)
    assert gain.matrix[0, 0] == 1.5, "kappa = abscissa + margin = 1.5"
    assert gain.abscissa == -0.5, "closed loop 1 - 1.5 = -0.5"


def test_scalar_riccati_gain_values():
    gain = build_feedback_gain(np.array([[-1.0]]), np.array([[1.0]]),
                               method="riccati", alpha=1.0)
    want = math.sqrt(2.0) - 1.0
    assert abs(gain.matrix[0, 0] - want) <= 1e-8, (
        f"scalar gain should be sqrt(2)-1, got {gain.matrix[0, 0]}"
    )
    assert abs(gain.abscissa + math.sqrt(2.0)) <= 1e-8


def test_unknown_gain_method_and_shape_mismatch():
    with pytest.raises(ConfigError):
        build_feedback_gain(np.eye(2), np.eye(2), method="pole_placement")
    with pytest.raises(DimensionMismatch):
        build_feedback_gain(np.eye(2), np.eye(3), method="zero")


def test_closed_loop_zero_initial_state():
    problem = make_problem(kind="fisher", n_interior=8, eta=0.5)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="riccati",
                               alpha=problem.alpha)
    tg = build_time_grid(1.0, 25)
    state, control, admissible = closed_loop_simulate(problem, np.zeros(8), gain, tg)
    assert np.array_equal(state.values, np.zeros((26, 8)))
    assert np.array_equal(control.values, np.zeros((25, 8)))
    assert admissible


def test_closed_loop_replay_through_open_loop():
    # feeding the recorded control back through solve_state reproduces the
    # closed-loop trajectory
    problem = make_problem(kind="fisher", n_interior=10, theta=1.0)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="riccati",
                               alpha=problem.alpha)
    tg = build_time_grid(1.5, 60)
    y0 = eigenmode_vector(problem.grid, 1, 0.3)
    state, control, _ = closed_loop_simulate(problem, y0, gain, tg)
    replay = solve_state(problem, tg, y0, controls=control)
    diff = np.max(np.abs(replay.values - state.values))
    assert diff <= 1e-9, f"replay deviates by {diff:.3e}"


def test_closed_loop_linear_superposition():
    problem = make_problem(kind="linear", n_interior=9, shift=2.0)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="shift")
    tg = build_time_grid(1.0, 30)
    rng = np.random.default_rng(11)
    y0 = rng.standard_normal(9)
    s1, c1, _ = closed_loop_simulate(problem, y0, gain, tg)
    s3, c3, _ = closed_loop_simulate(problem, 3.0 * y0, gain, tg)
    assert np.allclose(s3.values, 3.0 * s1.values, atol=1e-11)
    assert np.allclose(c3.values, 3.0 * c1.values, atol=1e-11)


def test_eta_only_flags_admissibility():
    problem = make_problem(kind="fisher", n_interior=8, shift=1.0, eta=math.inf)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="riccati",
                               alpha=problem.alpha)
    tg = build_time_grid(1.0, 20)
    y0 = eigenmode_vector(problem.grid, 1, 0.4)
    state, control, _ = closed_loop_simulate(problem, y0, gain, tg)
    sup_u = max(norm_y(problem.grid, control.values[k]) for k in range(20))
    from dataclasses import replace

    loose = replace(problem, eta=2.0 * sup_u)
    tight = replace(problem, eta=0.5 * sup_u)
    s_loose, _, ok_loose = closed_loop_simulate(loose, y0, gain, tg)
    s_tight, _, ok_tight = closed_loop_simulate(tight, y0, gain, tg)
    assert np.array_equal(s_loose.values, s_tight.values), (
        "control bound must not alter the simulated closed loop"
    )
    assert ok_loose and not ok_tight


def test_quadratic_kind_inside_radius_obeys_bounds():
    problem = make_problem(kind="fisher", n_interior=15, shift=1.0, eta=5.0)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="riccati",
                               alpha=problem.alpha)
    tg = build_time_grid(2.0, 80)
    report = estimate_smallness(problem, gain, tg, n_samples=16, seed=3)
    assert 0.0 < report.radius < math.inf
    amp = 0.5 * report.radius / math.sqrt(0.5)
    y0 = eigenmode_vector(problem.grid, 1, amp)
    assert norm_y(problem.grid, y0) <= report.radius
    state, control, admissible = closed_loop_simulate(problem, y0, gain, tg)
    assert admissible, "inside the admissibility radius the control obeys eta"
    fit = tail_decay_fit(problem.grid, state)
    assert fit.rate > 0.0, f"closed loop should decay, fitted rate {fit.rate}"
    winf = trajectory_norm(problem.grid, state, "winf", theta=problem.theta)
    bound = 2.0 * report.M_K * norm_y(problem.grid, y0) * 1.1
    assert winf <= bound, f"trajectory bound violated: {winf} > {bound}"


def test_cubic_kind_beyond_radius_not_masked():
    problem = make_problem(kind="schloegl", n_interior=15)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="zero")
    tg = build_time_grid(1.0, 50)
    y0 = eigenmode_vector(problem.grid, 1, 8.0)
    with pytest.raises(NonlinearStepDivergence) as info:
        closed_loop_simulate(problem, y0, gain, tg)
    assert info.value.step_index is not None


def test_smallness_linear_kind():
    problem = make_problem(kind="linear", n_interior=10, eta=2.0)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="riccati",
                               alpha=problem.alpha)
    tg = build_time_grid(2.0, 60)
    report = estimate_smallness(problem, gain, tg, n_samples=8, seed=0)
    assert report.C == 0.0, "linear kind has no nonlinearity slope"
    assert math.isinf(report.radius_stability)
    assert report.radius == report.radius_admissibility
    assert report.samples == 8


def test_smallness_eta_doubling_doubles_admissibility_radius():
    from dataclasses import replace

    problem = make_problem(kind="fisher", n_interior=10, shift=1.0, eta=1.0)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="riccati",
                               alpha=problem.alpha)
    tg = build_time_grid(2.0, 60)
    r1 = estimate_smallness(problem, gain, tg, n_samples=8, seed=2)
    r2 = estimate_smallness(replace(problem, eta=2.0), gain, tg, n_samples=8, seed=2)
    assert r2.radius_admissibility == 2.0 * r1.radius_admissibility, (
        "admissibility radius is exactly linear in the control bound"
    )
    assert r2.C == r1.C and r2.M_K == r1.M_K, "other constants must not move"


def test_smallness_slope_monotone_in_ball_radius():
    # independent oracle: scale a fixed family of trajectory pairs into
    # delta-balls and maximize the difference-quotient ratio; for the
    # quadratic kind the ratio scales linearly with delta
    problem = make_problem(kind="fisher", n_interior=8, shift=1.0)
    g = problem.grid
    tg = build_time_grid(1.0, 16)
    rng = np.random.default_rng(9)
    base = [rng.standard_normal((17, 8)) for _ in range(6)]
    from parastab import StateTrajectory

    def slope(delta):
        best = 0.0
        scaled = []
        for vals in base:
            traj = StateTrajectory(tg, vals)
            w = trajectory_norm(g, traj, "winf", theta=problem.theta)
            scaled.append(vals * (delta / w))
        for i in range(len(scaled)):
            for j in range(i + 1, len(scaled)):
                ya, yb = scaled[i], scaled[j]
                dw = trajectory_norm(g, StateTrajectory(tg, ya - yb), "winf",
                                     theta=problem.theta)
                fd = StateTrajectory(tg, problem.nl.f(ya) - problem.nl.f(yb))
                num = trajectory_norm(g, fd, "l2_vstar", theta=problem.theta)
                best = max(best, num / dw)
        return best

    c1, c2, c4 = slope(1.0), slope(0.5), slope(0.25)
    assert c1 >= c2 >= c4 > 0.0, f"slope must shrink with the ball: {c1} {c2} {c4}"

    gain = build_feedback_gain(problem.op, problem.b_dense, method="zero")
    report = estimate_smallness(problem, gain, tg, n_samples=10, seed=1)
    assert 0.0 < report.C < math.inf


def test_smallness_rejects_tiny_sample_count():
    problem = make_problem(kind="fisher", n_interior=6, shift=1.0)
    gain = build_feedback_gain(problem.op, problem.b_dense, method="zero")
    with pytest.raises(ConfigError):
        estimate_smallness(problem, gain, build_time_grid(1.0, 10), n_samples=1)


def test_resolve_horizon_tail_rule():
    problem = make_problem(kind="fisher", n_interior=12, shift=1.0)
    y0 = eigenmode_vector(problem.grid, 1, 0.1)
    tg, fit = resolve_horizon(problem, y0, tail_tol=1e-6)
    assert fit is not None
    scale = norm_y(problem.grid, y0)
    assert fit.amplitude * math.exp(-fit.rate * tg.horizon) <= 1e-6 * scale
    # a harsher tolerance forces a longer horizon
    tg2, _ = resolve_horizon(problem, y0, tail_tol=1e-10)
    assert tg2.horizon > tg.horizon


def test_resolve_horizon_zero_state_short_circuits():
    problem = make_problem(kind="fisher", n_interior=6, shift=1.0)
    tg, fit = resolve_horizon(problem, np.zeros(6))
    assert fit is None, "an identically zero tail cannot be fitted"
    assert tg.horizon == 2.0
