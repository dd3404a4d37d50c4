"""Command-line interface.

Subcommands cover the solver (solve), the precomputed feedback loop
(closed-loop, smallness), the value-function certificates (grad-check,
lipschitz, hjb, dp-check), the second-order probes (kkt-probe, coercivity)
and the reference solvers (lqr-oracle, brute-oracle). Every run writes its
results under --out in the requested formats. Exit codes: 0 success,
2 configuration or validation error, 3 solver failure.
"""

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import numpy as np

from .config import default_config, load_config, _parse_formats
from .errors import ConfigError, DimensionMismatch, ParastabError
from .oracle import (
    brute_force_tiny,
    finite_horizon_lqr,
    lqr_value_and_gradient,
    solve_riccati,
)
from .optimizer import (
    coercivity_probe,
    optimize,
    strong_regularity_probe,
)
from .pde_core import (
    TimeGrid,
    initial_state,
    node_times,
    norm_y,
    tail_decay_fit,
    trajectory_norm,
)
from .report import emit, heatmap_figure, line_figure, new_figure
from .stabilization import (
    build_feedback_gain,
    closed_loop_simulate,
    estimate_smallness,
    spectral_abscissa,
)
from .value_function import (
    dynamic_programming_check,
    fd_gradient_check,
    feedback_consistency,
    hjb_residual,
    lipschitz_probe,
    value_gradient,
)


def _thread_count():
    raw = os.environ.get("PARASTAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw, 10)
    except ValueError:
        raise ConfigError(
            f"PARASTAB_THREADS must be a positive integer, got {raw!r}"
        ) from None
    if n < 1:
        raise ConfigError(
            f"PARASTAB_THREADS must be a positive integer, got {raw!r}"
        )
    return min(n, os.cpu_count() or 1)


def _map_fn():
    """Order-preserving map, threaded when PARASTAB_THREADS > 1."""
    n = _thread_count()
    if n <= 1:
        return map

    def threaded(fn, items):
        items = list(items)
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(fn, items))

    return threaded


def _instance(cfg):
    problem = cfg.make_problem()
    y0 = cfg.initial_state(problem.grid)
    tg = cfg.resolve_time_grid(problem, y0)
    return problem, y0, tg


def _base_summary(command, cfg, problem, tg, seed):
    return {
        "command": command,
        "kind": problem.nl.kind,
        "n_interior": problem.n,
        "length": problem.grid.length,
        "alpha": problem.alpha,
        "eta": problem.eta,
        "theta": problem.theta,
        "horizon": tg.horizon,
        "n_steps": tg.n_steps,
        "dt": tg.dt,
        "seed": seed,
    }


def _traj_table(traj, prefix):
    t = node_times(traj)
    columns = ["t"] + [
        f"{prefix}_{j + 1}" for j in range(traj.values.shape[1])
    ]
    rows = np.column_stack([t, traj.values]).tolist()
    return columns, rows


def _norm_series(problem, state, control):
    t = node_times(state)
    y_norms = np.array(
        [norm_y(problem.grid, state.values[k]) for k in range(len(t))]
    )
    tu = node_times(control)
    u_norms = np.sqrt(
        problem.grid.h * np.sum(control.values * control.values, axis=1)
    )
    return (t, y_norms), (tu, u_norms)


def _trajectory_figures(problem, tg, state, control):
    (ty, ny), (tu, nu) = _norm_series(problem, state, control)
    floor = 1e-300
    norms = line_figure(
        "trajectory norms", "t", "norm",
        {
            "|y(t)|_Y": (ty, np.maximum(ny, floor)),
            "|u(t)|_U": (tu, np.maximum(nu, floor)),
        },
        logy=bool(np.all(ny > 0)),
    )
    heat = heatmap_figure(
        "state evolution", "t", "x",
        (0.0, tg.horizon, 0.0, problem.grid.length), state.values,
    )
    return {"norms": norms, "state": heat}


def _build_gain(cfg, problem):
    sec = cfg.values["stabilization"]
    return build_feedback_gain(
        problem.op.dense(), problem.b_dense, method=sec["gain_method"],
        alpha=problem.alpha, margin=sec["margin"],
    )


# ---------------------------------------------------------------------------
# handlers; each returns (summary, tables, figures)


def _cmd_solve(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    triple = optimize(problem, tg, y0, cfg.optimizer_config())
    summary = _base_summary("solve", cfg, problem, tg, seed)
    res = triple.residuals
    summary.update({
        "value": triple.cost,
        "converged": triple.converged,
        "iterations": triple.iterations,
        "state_residual": res.state_residual,
        "adjoint_residual": res.adjoint_residual,
        "projection_residual": res.projection_residual,
        "complementarity_gap": res.complementarity_gap,
        "sup_state": trajectory_norm(
            problem.grid, triple.ybar, "sup_y", theta=problem.theta
        ),
        "sup_control": trajectory_norm(
            problem.grid, triple.ubar, "sup_y", theta=problem.theta
        ),
        "feedback_consistency": feedback_consistency(
            problem, tg, y0, triple=triple
        ),
    })
    tables = {
        "state": _traj_table(triple.ybar, "y"),
        "control": _traj_table(triple.ubar, "u"),
        "adjoint": _traj_table(triple.pbar, "p"),
    }
    figures = _trajectory_figures(problem, tg, triple.ybar, triple.ubar)
    return summary, tables, figures


def _cmd_closed_loop(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    gain = _build_gain(cfg, problem)
    state, control, admissible = closed_loop_simulate(problem, y0, gain, tg)
    summary = _base_summary("closed-loop", cfg, problem, tg, seed)
    summary.update({
        "gain_method": gain.method,
        "open_abscissa": spectral_abscissa(problem.op),
        "closed_abscissa": gain.abscissa,
        "admissible": admissible,
        "sup_state": trajectory_norm(
            problem.grid, state, "sup_y", theta=problem.theta
        ),
        "sup_control": trajectory_norm(
            problem.grid, control, "sup_y", theta=problem.theta
        ),
    })
    try:
        fit = tail_decay_fit(problem.grid, state)
        summary["decay_rate"] = fit.rate
        summary["decay_fit_rms"] = fit.rms
    except ParastabError:
        summary["decay_rate"] = math.nan
        summary["decay_fit_rms"] = math.nan
    tables = {
        "state": _traj_table(state, "y"),
        "control": _traj_table(control, "u"),
    }
    figures = _trajectory_figures(problem, tg, state, control)
    return summary, tables, figures


def _cmd_smallness(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    gain = _build_gain(cfg, problem)
    sec = cfg.values["stabilization"]
    probe_seed = seed if args.seed is not None else sec["smallness_seed"]
    report = estimate_smallness(
        problem, gain, tg, n_samples=sec["smallness_samples"],
        seed=probe_seed,
    )
    summary = _base_summary("smallness", cfg, problem, tg, probe_seed)
    summary.update(asdict(report))
    names = ["radius_stability", "radius_admissibility", "radius"]
    tables = {
        "radii": (
            ["name", "value"],
            [[name, getattr(report, name)] for name in names],
        ),
    }
    fig = new_figure()
    ax = fig.add_subplot()
    finite = [(n, getattr(report, n)) for n in names
              if math.isfinite(getattr(report, n))]
    if finite:
        ax.barh([n for n, _ in finite], [v for _, v in finite])
    ax.set_title("smallness radii")
    ax.set_xlabel("radius")
    return summary, tables, {"radii": fig}


def _cmd_grad_check(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    sec = cfg.values["value_function"]
    directions = [
        initial_state(problem.grid, text.strip())
        for text in sec["directions"].split(";") if text.strip()
    ]
    if not directions:
        raise ConfigError(
            f"{cfg.path}: [value_function] directions is empty"
        )
    report = fd_gradient_check(
        problem, tg, y0, directions, sec["eps_list"], cfg.optimizer_config()
    )
    summary = _base_summary("grad-check", cfg, problem, tg, seed)
    summary.update({
        "value": report.base_value,
        "gradient_norm": norm_y(problem.grid, report.gradient),
        "observed_order": report.observed_order,
        "orders": list(report.orders),
    })
    tables = {
        "fd": (
            ["direction_id", "eps", "fd_value", "pairing", "abs_err"],
            report.rows,
        ),
    }
    series = {}
    for d_id in range(len(directions)):
        pts = [(r.eps, r.abs_err) for r in report.rows
               if r.direction_id == d_id and r.abs_err > 0]
        if pts:
            series[f"direction {d_id}"] = (
                [p[0] for p in pts], [p[1] for p in pts]
            )
    fig = line_figure("finite-difference error", "eps", "abs err",
                      series, logy=True, logx=True)
    return summary, tables, {"fd": fig}


def _cmd_lipschitz(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    sec = cfg.values["value_function"]
    probe_seed = seed if args.seed is not None else sec["probe_seed"]
    radii = sec["radii"]
    reports = [
        lipschitz_probe(
            problem, tg, y0, n_samples=sec["n_pairs"], radius=r,
            seed=probe_seed, cfg=cfg.optimizer_config(), map_fn=_map_fn(),
        )
        for r in radii
    ]
    summary = _base_summary("lipschitz", cfg, problem, tg, probe_seed)
    summary.update({
        "n_pairs": sec["n_pairs"],
        "radii": list(radii),
        "max_ratios": [rep.max_ratio for rep in reports],
    })
    rows = []
    for rep in reports:
        for row in rep.rows:
            rows.append([rep.radius, row.pair_id, row.norm_dy0,
                         row.norm_ddelta, row.ratio])
    tables = {
        "ratios": (
            ["radius", "pair_id", "norm_dy0", "norm_ddelta", "ratio"], rows
        ),
    }
    series = {
        f"radius {rep.radius:g}": (
            [row.pair_id for row in rep.rows],
            [row.ratio for row in rep.rows],
        )
        for rep in reports if rep.rows
    }
    fig = line_figure("solution-map Lipschitz ratios", "pair", "ratio",
                      series)
    return summary, tables, {"ratios": fig}


def _cmd_hjb(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    levels = max(1, args.levels)
    rows = []
    for level in range(levels):
        tg_l = TimeGrid(tg.n_steps * 2**level, tg.horizon)
        grad = value_gradient(problem, tg_l, y0, cfg=cfg.optimizer_config())
        res = hjb_residual(problem, y0, grad)
        rows.append([level, tg_l.dt, tg_l.n_steps, res])
    summary = _base_summary("hjb", cfg, problem, tg, seed)
    summary.update({
        "levels": levels,
        "residuals": [r[3] for r in rows],
        "dts": [r[1] for r in rows],
    })
    tables = {"residuals": (["level", "dt", "n_steps", "residual"], rows)}
    positive = [(r[1], r[3]) for r in rows if r[3] > 0]
    series = {}
    if positive:
        series["residual"] = (
            [p[0] for p in positive], [p[1] for p in positive]
        )
    fig = line_figure("HJB residual under time refinement", "dt",
                      "residual", series, logy=True, logx=True)
    return summary, tables, {"residuals": fig}


def _cmd_dp_check(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    sec = cfg.values["value_function"]
    tau = sec["tau"] if sec["tau"] > 0.0 else tg.horizon / 4.0
    report = dynamic_programming_check(
        problem, tg, y0, tau, cfg.optimizer_config()
    )
    summary = _base_summary("dp-check", cfg, problem, tg, seed)
    summary.update(asdict(report))
    tables = {
        "split": (
            list(asdict(report).keys()), [list(asdict(report).values())]
        ),
    }
    fig = new_figure()
    ax = fig.add_subplot()
    ax.bar(["full", "head + tail"], [report.value_full, report.value_split])
    ax.set_title("dynamic-programming split")
    ax.set_ylabel("value")
    return summary, tables, {"split": fig}


def _cmd_kkt_probe(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    sec = cfg.values["value_function"]
    probe_seed = seed if args.seed is not None else sec["probe_seed"]
    opt = cfg.values["optimizer"]
    triple = optimize(problem, tg, y0, cfg.optimizer_config())
    report = strong_regularity_probe(
        problem, triple, n_pairs=sec["n_pairs"], radius=sec["radii"][0],
        seed=probe_seed, shared_direction=args.shared_direction,
        tol_kkt=opt["tol_kkt"], max_iter=opt["kkt_max_iter"],
        map_fn=_map_fn(),
    )
    summary = _base_summary("kkt-probe", cfg, problem, tg, probe_seed)
    summary.update({
        "n_pairs": sec["n_pairs"],
        "radius": sec["radii"][0],
        "shared_direction": bool(args.shared_direction),
        "max_ratio": report.max_ratio,
    })
    tables = {
        "ratios": (
            ["pair_id", "norm_dbeta", "norm_ddelta", "ratio"], report.rows
        ),
    }
    series = {}
    if report.rows:
        series["ratio"] = (
            [row.pair_id for row in report.rows],
            [row.ratio for row in report.rows],
        )
    fig = line_figure("linearized-system Lipschitz ratios", "pair", "ratio",
                      series)
    return summary, tables, {"ratios": fig}


def _cmd_coercivity(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    sec = cfg.values["value_function"]
    probe_seed = seed if args.seed is not None else sec["probe_seed"]
    triple = optimize(problem, tg, y0, cfg.optimizer_config())
    report = coercivity_probe(
        problem, triple, n_samples=sec["n_samples"], seed=probe_seed
    )
    summary = _base_summary("coercivity", cfg, problem, tg, probe_seed)
    summary.update({
        "n_samples": report.samples,
        "min_rayleigh": report.min_rayleigh,
        "gamma_bar_estimate": report.gamma_bar_estimate,
    })
    tables = {
        "rayleigh": (
            ["sample_id", "rayleigh_l2", "rayleigh_winf"], report.rows
        ),
    }
    series = {}
    if report.rows:
        series = {
            "l2 pairing": (
                [r.sample_id for r in report.rows],
                [r.rayleigh_l2 for r in report.rows],
            ),
            "winf pairing": (
                [r.sample_id for r in report.rows],
                [r.rayleigh_winf for r in report.rows],
            ),
        }
    fig = line_figure("Hessian Rayleigh quotients", "sample", "quotient",
                      series)
    return summary, tables, {"rayleigh": fig}


def _cmd_lqr_oracle(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    if not problem.nl.is_linear:
        raise ConfigError(
            "lqr-oracle requires kind = linear, got "
            f"{problem.nl.kind!r}"
        )
    sec = cfg.values["oracle"]
    a = problem.op.dense()
    b = problem.b_dense
    sol = solve_riccati(
        a, b, problem.alpha, np.eye(problem.n),
        tol=sec["riccati_tol"], max_iter=sec["riccati_max_iter"],
    )
    val, grad = lqr_value_and_gradient(sol.p, y0, mass=problem.grid.h)
    fh = finite_horizon_lqr(problem, tg, y0)
    summary = _base_summary("lqr-oracle", cfg, problem, tg, seed)
    summary.update({
        "value_riccati": val,
        "value_finite_horizon": fh.value,
        "value_gap": abs(val - fh.value),
        "gradient_norm": norm_y(problem.grid, grad),
        "riccati_iterations": sol.iterations,
        "riccati_residual": sol.residual,
        "closed_abscissa": spectral_abscissa(a - b @ sol.k_lqr),
    })
    tables = {
        "p_matrix": (
            [f"p_{j + 1}" for j in range(problem.n)], sol.p.tolist()
        ),
    }
    eig = np.linalg.eigvals(a - b @ sol.k_lqr)
    fig = new_figure()
    ax = fig.add_subplot()
    ax.scatter(eig.real, eig.imag, marker="x")
    ax.axvline(0.0, color="k", linewidth=0.8)
    ax.set_title("closed-loop spectrum")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    return summary, tables, {"spectrum": fig}


def _cmd_brute_oracle(cfg, args, seed):
    problem, y0, tg = _instance(cfg)
    if not math.isfinite(problem.eta):
        raise ConfigError("brute-oracle requires a finite eta")
    sec = cfg.values["oracle"]
    raw_bound = problem.eta / math.sqrt(problem.grid.h)
    control_grid = np.linspace(-raw_bound, raw_bound, sec["brute_points"])
    result = brute_force_tiny(
        problem, tg, y0, control_grid=control_grid, cap=sec["brute_cap"]
    )
    triple = optimize(problem, tg, y0, cfg.optimizer_config())
    gap = triple.cost - result.best_j
    best_u = result.best_u.reshape(-1, 1)
    summary = _base_summary("brute-oracle", cfg, problem, tg, seed)
    summary.update({
        "best_j": result.best_j,
        "solver_value": triple.cost,
        "value_gap": gap,
        "within_cell": bool(abs(gap) <= result.neighbor_gap + 1e-12),
        "spacing": result.spacing,
        "neighbor_gap": result.neighbor_gap,
        "evaluations": result.evaluations,
    })
    rows = np.column_stack(
        [np.arange(tg.n_steps), best_u, triple.ubar.values]
    ).tolist()
    tables = {
        "controls": (
            ["k", "brute_u", "solver_u"],
            rows,
        ),
    }
    fig = new_figure()
    ax = fig.add_subplot()
    t = node_times(triple.ubar)
    ax.step(t, best_u[:, 0], where="post", label="enumerated")
    ax.step(t, triple.ubar.values[:, 0], where="post", label="solver")
    ax.set_title("first control component")
    ax.set_xlabel("t")
    ax.set_ylabel("u")
    ax.legend(loc="best")
    return summary, tables, {"controls": fig}


_HANDLERS = {
    "solve": _cmd_solve,
    "closed-loop": _cmd_closed_loop,
    "smallness": _cmd_smallness,
    "grad-check": _cmd_grad_check,
    "lipschitz": _cmd_lipschitz,
    "hjb": _cmd_hjb,
    "dp-check": _cmd_dp_check,
    "kkt-probe": _cmd_kkt_probe,
    "coercivity": _cmd_coercivity,
    "lqr-oracle": _cmd_lqr_oracle,
    "brute-oracle": _cmd_brute_oracle,
}

_DESCRIPTIONS = {
    "solve": "solve the constrained stabilization problem from y0",
    "closed-loop": "simulate the precomputed-feedback loop",
    "smallness": "estimate the smallness radius of the feedback design",
    "grad-check": "finite-difference check of the value gradient",
    "lipschitz": "sample solution-map Lipschitz ratios in y0",
    "hjb": "evaluate the HJB residual under time refinement",
    "dp-check": "dynamic-programming split consistency",
    "kkt-probe": "sample Lipschitz ratios of the linearized system",
    "coercivity": "sample Rayleigh quotients of the reduced Hessian",
    "lqr-oracle": "continuous and discrete LQ references (linear kind)",
    "brute-oracle": "exhaustive control enumeration on a tiny instance",
}


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=None,
                        help="INI experiment file (defaults used if absent)")
    common.add_argument("--out", metavar="DIR", default="out",
                        help="output directory (default: out)")
    common.add_argument("--seed", metavar="N", type=int, default=None,
                        help="override every probe seed")
    common.add_argument("--format", metavar="LIST", default=None,
                        help="comma-separated outputs: json,csv,png")
    parser = argparse.ArgumentParser(
        prog="parastab",
        description="discretized constrained-stabilization toolbox",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _DESCRIPTIONS.items():
        p = sub.add_parser(name, parents=[common], help=help_text,
                           description=help_text)
        if name == "hjb":
            p.add_argument("--levels", type=int, default=1,
                           help="time-refinement levels (default 1)")
        if name == "kkt-probe":
            p.add_argument("--shared-direction", action="store_true",
                           help="fix the perturbation difference direction")
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.format is not None:
            try:
                formats = _parse_formats(args.format)
            except ValueError as exc:
                raise ConfigError(f"--format: {exc}") from None
        else:
            formats = cfg.values["cli"]["formats"]
        seed = args.seed if args.seed is not None else cfg.values["cli"]["seed"]
        prefix = f"{cfg.values['cli']['prefix']}_{args.command.replace('-', '_')}"
        summary, tables, figures = _HANDLERS[args.command](cfg, args, seed)
        paths = emit(args.out, prefix, formats, summary, tables, figures)
        for path in paths:
            print(path)
        return 0
    except (ConfigError, DimensionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ParastabError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
