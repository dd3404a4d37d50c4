"""Experiment configuration, read from INI files.

Sections mirror the library layout: [pde_core] describes the problem, grid
and horizon policy, [stabilization] the feedback and smallness probe,
[optimizer] the solver tolerances, [value_function] the certificate probes,
[oracle] the reference solvers, and [cli] output choices. Every key is
schema-checked; violations raise ConfigError with a file:line anchor.
"""

import configparser
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .pde_core import KINDS, TimeGrid, initial_state, make_problem
from .optimizer import OptimizerConfig

_FORMATS = ("json", "csv", "png")


def _parse_float(text):
    low = text.strip().lower()
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    return float(text)


def _parse_int(text):
    return int(text.strip(), 10)


def _parse_str(text):
    return text.strip()


def _parse_float_list(text):
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    if not items:
        raise ValueError("empty list")
    return tuple(_parse_float(t) for t in items)


def _parse_formats(text):
    items = tuple(t for t in (s.strip() for s in text.split(",")) if t)
    if not items:
        raise ValueError("empty list")
    for item in items:
        if item not in _FORMATS:
            raise ValueError(f"unknown format {item!r}, expected {_FORMATS}")
    return items


@dataclass(frozen=True)
class _Key:
    parse: callable
    default: object
    check: Optional[callable] = None
    expect: str = ""


def _positive(v):
    return v > 0.0


def _nonneg(v):
    return v >= 0.0


def _unit(v):
    return 0.0 < v <= 1.0


def _ge1(v):
    return v >= 1


_SCHEMA = {
    "pde_core": {
        "kind": _Key(_parse_str, "fisher", lambda v: v in KINDS,
                     f"one of {KINDS}"),
        "shift": _Key(_parse_str, "auto", None,
                      "a float or 'auto' for the kind default"),
        "gamma": _Key(_parse_float, 0.5, _nonneg, "a float >= 0"),
        "length": _Key(_parse_float, 1.0, _positive, "a float > 0"),
        "n_interior": _Key(_parse_int, 32, _ge1, "an integer >= 1"),
        "alpha": _Key(_parse_float, 0.1, _positive, "a float > 0"),
        "eta": _Key(_parse_float, math.inf, _positive, "a float > 0 or inf"),
        "b": _Key(_parse_str, "identity"),
        "theta": _Key(_parse_float, 1.0, _unit, "a float in (0, 1]"),
        "tol_step": _Key(_parse_float, 1e-12, _positive, "a float > 0"),
        "max_newton": _Key(_parse_int, 25, _ge1, "an integer >= 1"),
        "y0": _Key(_parse_str, "eigenmode 1 0.1"),
        "horizon": _Key(_parse_str, "auto", None, "a float > 0 or 'auto'"),
        "n_steps": _Key(_parse_int, 0, _nonneg, "an integer >= 0"),
        "dt": _Key(_parse_float, 0.0, _nonneg, "a float >= 0"),
        "tail_tol": _Key(_parse_float, 1e-6, _positive, "a float > 0"),
        "n_steps_cap": _Key(_parse_int, 4096, _ge1, "an integer >= 1"),
    },
    "stabilization": {
        "gain_method": _Key(_parse_str, "riccati",
                            lambda v: v in ("zero", "shift", "riccati"),
                            "one of ('zero', 'shift', 'riccati')"),
        "margin": _Key(_parse_float, 0.5, _positive, "a float > 0"),
        "smallness_samples": _Key(_parse_int, 24, _ge1, "an integer >= 1"),
        "smallness_seed": _Key(_parse_int, 0, _nonneg, "an integer >= 0"),
    },
    "optimizer": {
        "tol_opt": _Key(_parse_float, 1e-8, _positive, "a float > 0"),
        "tol_kkt": _Key(_parse_float, 1e-10, _positive, "a float > 0"),
        "max_iter": _Key(_parse_int, 500, _ge1, "an integer >= 1"),
        "kkt_max_iter": _Key(_parse_int, 2000, _ge1, "an integer >= 1"),
        "armijo": _Key(_parse_float, 1e-4, _unit, "a float in (0, 1]"),
    },
    "value_function": {
        "eps_list": _Key(_parse_float_list, (1e-3, 1e-4),
                         lambda v: all(e > 0 for e in v),
                         "comma-separated floats > 0"),
        "directions": _Key(_parse_str, "eigenmode 1 1.0; eigenmode 2 1.0"),
        "n_pairs": _Key(_parse_int, 50, _ge1, "an integer >= 1"),
        "radii": _Key(_parse_float_list, (1e-3, 1e-4),
                      lambda v: all(r > 0 for r in v),
                      "comma-separated floats > 0"),
        "tau": _Key(_parse_float, 0.0, _nonneg,
                    "a float >= 0 (0 means a quarter of the horizon)"),
        "probe_seed": _Key(_parse_int, 0, _nonneg, "an integer >= 0"),
        "n_samples": _Key(_parse_int, 20, _ge1, "an integer >= 1"),
    },
    "oracle": {
        "riccati_tol": _Key(_parse_float, 1e-10, _positive, "a float > 0"),
        "riccati_max_iter": _Key(_parse_int, 60, _ge1, "an integer >= 1"),
        "brute_points": _Key(_parse_int, 21, lambda v: v >= 2,
                             "an integer >= 2"),
        "brute_cap": _Key(_parse_int, 10_000_000, _ge1, "an integer >= 1"),
    },
    "cli": {
        "seed": _Key(_parse_int, 0, _nonneg, "an integer >= 0"),
        "formats": _Key(_parse_formats, _FORMATS,
                        None, "comma-separated subset of json,csv,png"),
        "prefix": _Key(_parse_str, "run"),
    },
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    path: str = "<defaults>"

    def get(self, section, key):
        try:
            return self.values[section][key]
        except KeyError:
            raise KeyError(f"no config entry [{section}] {key}") from None

    # -- construction helpers ------------------------------------------------

    def make_problem(self):
        sec = self.values["pde_core"]
        shift = None if sec["shift"].lower() == "auto" else _parse_float(
            sec["shift"]
        )
        return make_problem(
            kind=sec["kind"], n_interior=sec["n_interior"],
            length=sec["length"], alpha=sec["alpha"], eta=sec["eta"],
            shift=shift, gamma=sec["gamma"], b_spec=sec["b"],
            theta=sec["theta"], tol_step=sec["tol_step"],
            max_newton=sec["max_newton"],
        )

    def initial_state(self, grid):
        return initial_state(grid, self.values["pde_core"]["y0"])

    def resolve_time_grid(self, problem, y0):
        """Fixed grid when horizon is numeric, otherwise tail-fit doubling."""
        sec = self.values["pde_core"]
        horizon_text = sec["horizon"].lower()
        if horizon_text == "auto":
            from .stabilization import resolve_horizon

            dt_target = sec["dt"] if sec["dt"] > 0.0 else 1e-2
            tg, _ = resolve_horizon(
                problem, y0, tail_tol=sec["tail_tol"], dt_target=dt_target,
                n_steps_cap=sec["n_steps_cap"],
            )
            return tg
        horizon = _parse_float(sec["horizon"])
        if not horizon > 0.0:
            raise ConfigError(
                f"{self.path}: [pde_core] horizon: expected a float > 0 "
                f"or 'auto', got {sec['horizon']!r}"
            )
        if sec["n_steps"] > 0 and sec["dt"] > 0.0:
            raise ConfigError(
                f"{self.path}: [pde_core] n_steps and dt are both set; "
                "give exactly one with a numeric horizon"
            )
        if sec["dt"] > 0.0:
            n_steps = max(1, int(round(horizon / sec["dt"])))
        elif sec["n_steps"] > 0:
            n_steps = sec["n_steps"]
        else:
            n_steps = 400
        return TimeGrid(n_steps, horizon)

    def optimizer_config(self, u0=None):
        sec = self.values["optimizer"]
        return OptimizerConfig(
            tol_opt=sec["tol_opt"], tol_kkt=sec["tol_kkt"],
            max_iter=sec["max_iter"], kkt_max_iter=sec["kkt_max_iter"],
            armijo=sec["armijo"], u0=u0,
        )


def default_config():
    values = {
        section: {key: spec.default for key, spec in keys.items()}
        for section, keys in _SCHEMA.items()
    }
    return ExperimentConfig(values=values, path="<defaults>")


def _key_lines(text):
    """Map (section, key) and (section, None) to 1-based line numbers."""
    lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            lines.setdefault((section, None), lineno)
            continue
        if section is None:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key = line.split(sep, 1)[0].strip()
                lines.setdefault((section, key), lineno)
                break
    return lines


def load_config(path):
    """Parse and validate an INI experiment file into ExperimentConfig."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    anchors = _key_lines(text)
    cfg = default_config()
    cfg.path = str(path)
    for section in parser.sections():
        if section not in _SCHEMA:
            line = anchors.get((section, None), 0)
            raise ConfigError(
                f"{path}:{line}: unknown section [{section}]; expected one "
                f"of {tuple(_SCHEMA)}"
            )
        for key, raw in parser.items(section):
            spec = _SCHEMA[section].get(key)
            line = anchors.get((section, key), anchors.get((section, None), 0))
            if spec is None:
                raise ConfigError(
                    f"{path}:{line}: unknown key {key!r} in [{section}]; "
                    f"expected one of {tuple(_SCHEMA[section])}"
                )
            try:
                value = spec.parse(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(
                    f"{path}:{line}: [{section}] {key}: could not parse "
                    f"{raw!r}"
                    + (f" (expected {spec.expect})" if spec.expect else "")
                    + f": {exc}"
                ) from None
            if spec.check is not None and not spec.check(value):
                raise ConfigError(
                    f"{path}:{line}: [{section}] {key}: value {raw!r} out of "
                    f"range, expected {spec.expect}"
                ) from None
            cfg.values[section][key] = value
    return cfg
