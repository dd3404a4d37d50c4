"""Trajectory containers and their on-disk formats.

State and adjoint trajectories hold one row per time node (n_steps + 1
rows). Control trajectories hold one row per step: u[k] acts as a constant
on [t_k, t_{k+1}), so there are n_steps rows tagged with the left node time.

CSV layout: header then one row per time node, columns t, x_1..x_n
(or t, u_1..u_m for controls). Binary layout: a fixed little-endian header
(magic, kind, n_steps, n_cols, length, horizon) followed by the float64
value block; round trips are exact.
"""

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from .grid import TimeGrid

_MAGIC = b"PSTJ"
_VERSION = 1
_KIND_CODE = {"state": 0, "adjoint": 1, "control": 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


@dataclass
class StateTrajectory:
    tg: TimeGrid
    values: np.ndarray  # (n_steps + 1, n)

    kind = "state"

    def __post_init__(self):
        _check_rows(self, self.tg.n_steps + 1)


@dataclass
class AdjointTrajectory:
    tg: TimeGrid
    values: np.ndarray  # (n_steps + 1, n); values[-1] == 0

    kind = "adjoint"

    def __post_init__(self):
        _check_rows(self, self.tg.n_steps + 1)


@dataclass
class ControlTrajectory:
    tg: TimeGrid
    values: np.ndarray  # (n_steps, m)

    kind = "control"

    def __post_init__(self):
        _check_rows(self, self.tg.n_steps)


_CLASS = {
    "state": StateTrajectory,
    "adjoint": AdjointTrajectory,
    "control": ControlTrajectory,
}


def _check_rows(traj, expected):
    traj.values = np.atleast_2d(np.asarray(traj.values, dtype=float))
    if traj.values.shape[0] != expected:
        raise DimensionMismatch(
            f"{traj.kind} trajectory needs {expected} rows, got {traj.values.shape[0]}"
        )


def node_times(traj):
    t = traj.tg.t
    return t[:-1] if traj.kind == "control" else t


def write_csv(traj, path, spatial_length=None):
    prefix = "u" if traj.kind == "control" else "x"
    cols = traj.values.shape[1]
    header = "t," + ",".join(f"{prefix}_{j + 1}" for j in range(cols))
    t = node_times(traj)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for k in range(len(t)):
            row = ",".join(_fmt(v) for v in traj.values[k])
            fh.write(f"{_fmt(t[k])},{row}\n")


def _fmt(x):
    return format(float(x), ".17g")


def save_binary(traj, path, spatial_length=1.0):
    values = np.ascontiguousarray(traj.values, dtype="<f8")
    head = struct.pack(
        "<4sBBqqdd",
        _MAGIC,
        _VERSION,
        _KIND_CODE[traj.kind],
        traj.tg.n_steps,
        values.shape[1],
        float(spatial_length),
        traj.tg.horizon,
    )
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(values.tobytes())


def load_binary(path):
    head_size = struct.calcsize("<4sBBqqdd")
    with open(path, "rb") as fh:
        head = fh.read(head_size)
        magic, version, code, n_steps, n_cols, length, horizon = struct.unpack(
            "<4sBBqqdd", head
        )
        if magic != _MAGIC or version != _VERSION:
            raise DimensionMismatch(f"not a trajectory file: {path}")
        payload = fh.read()
    kind = _CODE_KIND[code]
    rows = n_steps if kind == "control" else n_steps + 1
    values = np.frombuffer(payload, dtype="<f8", count=rows * n_cols)
    values = values.reshape(rows, n_cols).copy()
    tg = TimeGrid(int(n_steps), float(horizon))
    return _CLASS[kind](tg, values), float(length)
