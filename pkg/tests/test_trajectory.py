"""Trajectory containers and their CSV/binary serialization."""

import numpy as np
import pytest

from parastab import (
    AdjointTrajectory,
    ControlTrajectory,
    DimensionMismatch,
    StateTrajectory,
    TimeGrid,
    load_binary,
    node_times,
    save_binary,
)
from parastab.pde_core.trajectory import write_csv


def test_row_count_validation():
    tg = TimeGrid(4, 1.0)
    StateTrajectory(tg, np.zeros((5, 3)))
    ControlTrajectory(tg, np.zeros((4, 3)))
    AdjointTrajectory(tg, np.zeros((5, 3)))
    with pytest.raises(DimensionMismatch):
        StateTrajectory(tg, np.zeros((4, 3)))
    with pytest.raises(DimensionMismatch):
        ControlTrajectory(tg, np.zeros((5, 3)))


def test_node_times_against_grid():
    tg = TimeGrid(4, 2.0)
    state = StateTrajectory(tg, np.zeros((5, 2)))
    ctrl = ControlTrajectory(tg, np.zeros((4, 2)))
    assert np.array_equal(node_times(state), [0.0, 0.5, 1.0, 1.5, 2.0])
    assert np.array_equal(node_times(ctrl), [0.0, 0.5, 1.0, 1.5]), (
        "controls are tagged with the left node of their interval"
    )


def test_csv_golden_lines(tmp_path):
    tg = TimeGrid(2, 1.0)
    traj = StateTrajectory(tg, np.array([[0.0, 1.0], [0.25, -1.5], [0.5, 2.0]]))
    path = tmp_path / "state.csv"
    write_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x_1,x_2"
    assert lines[1] == "0,0,1"
    assert lines[2] == "0.5,0.25,-1.5"
    assert lines[3] == "1,0.5,2"
    assert len(lines) == 4


def test_csv_control_header(tmp_path):
    tg = TimeGrid(2, 1.0)
    traj = ControlTrajectory(tg, np.array([[0.125], [0.375]]))
    path = tmp_path / "u.csv"
    write_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,u_1"
    assert len(lines) == 3, "one row per step, not per node"


def test_csv_full_precision(tmp_path):
    tg = TimeGrid(1, 1.0)
    val = 0.1 + 0.2  # not representable exactly; 17 digits must survive
    traj = ControlTrajectory(tg, np.array([[val]]))
    path = tmp_path / "u.csv"
    write_csv(traj, path)
    cell = path.read_text().splitlines()[1].split(",")[1]
    assert float(cell) == val, f"17-digit round trip broken: {cell}"


def test_binary_round_trip_exact(tmp_path):
    tg = TimeGrid(6, 1.5)
    rng = np.random.default_rng(7)
    for make, rows in (
        (StateTrajectory, 7),
        (AdjointTrajectory, 7),
        (ControlTrajectory, 6),
    ):
        traj = make(tg, rng.standard_normal((rows, 4)))
        path = tmp_path / f"{make.__name__}.bin"
        save_binary(traj, path, spatial_length=2.5)
        back, length = load_binary(path)
        assert type(back) is make
        assert length == 2.5
        assert back.tg.n_steps == 6 and back.tg.horizon == 1.5
        assert np.array_equal(back.values, traj.values), (
            f"{make.__name__}: binary round trip must be bitwise exact"
        )


def test_binary_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(DimensionMismatch):
        load_binary(path)
