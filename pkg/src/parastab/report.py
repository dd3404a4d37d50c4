"""Deterministic result emission: JSON, CSV and PNG files.

Floats are written with 17 significant digits so values round-trip exactly;
non-finite floats become the strings "inf", "-inf", "nan" in JSON. Key order
is the insertion order of the payload dictionaries, so two runs with the
same inputs produce byte-identical files. PNG output goes through the Agg
canvas with fixed size, dpi and metadata for the same reason.
"""

import dataclasses
import json
import math
import os

import numpy as np
from matplotlib.figure import Figure


def format_float(x):
    """17-significant-digit text for a float; named strings when non-finite."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def _json_fragment(obj, out):
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            out.append(format_float(x))
        else:
            out.append(json.dumps(format_float(x)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _json_fragment(obj.tolist(), out)
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _json_fragment(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(", ")
            _json_fragment(value, out)
        out.append("]")
    elif dataclasses.is_dataclass(obj):
        _json_fragment(dataclasses.asdict(obj), out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def dumps_json(payload):
    out = []
    _json_fragment(payload, out)
    out.append("\n")
    return "".join(out)


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(dumps_json(payload))
    return path


def write_csv(path, columns, rows):
    """One header line plus one line per row; empty rows leave the header."""
    lines = [",".join(str(c) for c in columns)]
    for row in rows:
        if dataclasses.is_dataclass(row):
            row = dataclasses.astuple(row)
        cells = [_cell(v) for v in row]
        if len(cells) != len(columns):
            raise ValueError(
                f"row width {len(cells)} does not match header width "
                f"{len(columns)}"
            )
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
    return path


_PNG_METADATA = {"Software": "parastab"}


def new_figure():
    return Figure(figsize=(6.4, 4.8), dpi=100)


def write_png(path, figure):
    figure.savefig(path, format="png", metadata=_PNG_METADATA)
    return path


def line_figure(title, xlabel, ylabel, series, logy=False, logx=False):
    """One axes with labeled line series; series is {label: (x, y)}."""
    fig = new_figure()
    ax = fig.add_subplot()
    for label, (x, y) in series.items():
        ax.plot(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                label=label)
    if logy:
        ax.set_yscale("log")
    if logx:
        ax.set_xscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if series:
        ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    return fig


def heatmap_figure(title, xlabel, ylabel, extent, values):
    """Space-time raster of a trajectory; values has one row per time node."""
    fig = new_figure()
    ax = fig.add_subplot()
    image = ax.imshow(
        np.asarray(values, dtype=float).T, aspect="auto", origin="lower",
        extent=extent, cmap="viridis",
    )
    fig.colorbar(image, ax=ax)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig


def emit(out_dir, prefix, formats, summary, tables=None, figures=None):
    """Write the run outputs and return the list of paths.

    summary is a flat dict for <prefix>.json (tables are inlined there too);
    each table is (columns, rows) and becomes <prefix>_<name>.csv; each
    figure is a ready matplotlib Figure and becomes <prefix>_<name>.png.
    """
    tables = tables or {}
    figures = figures or {}
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "json" in formats:
        payload = dict(summary)
        if tables:
            payload["tables"] = {
                name: {
                    "columns": list(columns),
                    "rows": [
                        list(dataclasses.astuple(r))
                        if dataclasses.is_dataclass(r) else list(r)
                        for r in rows
                    ],
                }
                for name, (columns, rows) in tables.items()
            }
        written.append(
            write_json(os.path.join(out_dir, f"{prefix}.json"), payload)
        )
    if "csv" in formats:
        for name, (columns, rows) in tables.items():
            written.append(
                write_csv(
                    os.path.join(out_dir, f"{prefix}_{name}.csv"),
                    columns, rows,
                )
            )
    if "png" in formats:
        for name, figure in figures.items():
            written.append(
                write_png(os.path.join(out_dir, f"{prefix}_{name}.png"),
                          figure)
            )
    return written
