"""
Metric tests: DTW against a brute-force path enumeration, RMS force, learning
curves and comparison grids.
"""

import math

import numpy as np
import pandas as pd
import pytest

from errors import NoWrenchData, TrajectoryError
from geometry import Pose
from metrics import (CURVE_COLUMNS, comparison_grid, dtw_alignment, dtw_distance, learning_curve,
                     rms_contact_force)
from plant import StopEvent
from refinement import IterationRecord, RefinementConfig, RefinementRun, StageRecord
from trajectory import Trajectory, Wrench


def brute_force(a, b):
    """(cost, length) of the cheapest warping path, found by walking every monotone path."""
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2).tolist()
    n, m = len(a), len(b)
    best = [math.inf, 0]

    def walk(i, j, total, steps):
        total += cost[i][j]
        steps += 1
        if i == n - 1 and j == m - 1:
            if (total, steps) < tuple(best):
                best[:] = [total, steps]
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, total, steps)
        if i + 1 < n:
            walk(i + 1, j, total, steps)
        if j + 1 < m:
            walk(i, j + 1, total, steps)

    walk(0, 0, 0.0, 0)
    return tuple(best)


def with_forces(forces):
    poses = tuple(Pose.from_translation((0.001 * k, 0.0, 0.0)) for k in range(len(forces)))
    wrenches = tuple(Wrench(f) for f in forces)
    return Trajectory(poses, wrenches, 50.0, "forces")


def test_identical_sequences():
    rng = np.random.default_rng(30)
    a = rng.normal(size=(40, 3))
    assert dtw_distance(a, a) == 0.0
    result = dtw_alignment(a, a)
    assert result.path == tuple((k, k) for k in range(40))


def test_single_pair():
    assert dtw_distance([[0.0, 0.0, 0.0]], [[3.0, 4.0, 0.0]]) == 5.0


def test_unequal_lengths():
    a = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
    b = np.array([[0.0, 0, 0]])
    result = dtw_alignment(a, b)
    assert result.path == ((0, 0), (1, 0), (2, 0))
    assert result.cost == pytest.approx(3.0)
    assert result.distance == pytest.approx(1.0)


def test_matches_brute_force():
    rng = np.random.default_rng(31)
    for _ in range(200):
        n, m = (int(v) for v in rng.integers(1, 9, size=2))
        a, b = rng.normal(size=(n, 3)), rng.normal(size=(m, 3))
        cost, length = brute_force(a, b)
        result = dtw_alignment(a, b)
        assert abs(result.cost - cost) < 1e-12
        assert result.path_length == length
        assert abs(result.distance - cost / length) < 1e-12


def test_path_is_monotone_with_matched_endpoints():
    rng = np.random.default_rng(32)
    result = dtw_alignment(rng.normal(size=(25, 3)), rng.normal(size=(17, 3)))
    assert result.path[0] == (0, 0)
    assert result.path[-1] == (24, 16)
    for (i0, j0), (i1, j1) in zip(result.path, result.path[1:]):
        assert (i1 - i0, j1 - j0) in ((1, 0), (0, 1), (1, 1))
    assert len(result.path) == result.path_length


def test_symmetry():
    rng = np.random.default_rng(33)
    for _ in range(20):
        a, b = rng.normal(size=(12, 3)), rng.normal(size=(9, 3))
        assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), abs=1e-12)


def test_translation_bound():
    rng = np.random.default_rng(34)
    a = np.cumsum(rng.normal(scale=0.01, size=(60, 3)), axis=0)
    offset = np.array([0.003, -0.004, 0.0])
    assert dtw_distance(a, a + offset) <= 0.005 + 1e-12


def test_band():
    rng = np.random.default_rng(35)
    a, b = rng.normal(size=(30, 3)), rng.normal(size=(30, 3))
    assert dtw_distance(a, b, band=30) == dtw_distance(a, b)
    assert dtw_distance(a, b, band=2, normalized=False) >= dtw_distance(a, b, normalized=False)
    # narrower than the length ratio still finds a path
    assert math.isfinite(dtw_distance(a[:5], b, band=1))


def test_empty_input():
    with pytest.raises(TrajectoryError):
        dtw_distance(np.zeros((0, 3)), np.zeros((4, 3)))


def test_rms_examples():
    assert rms_contact_force(with_forces([(0.0, 0.0, 0.0)] * 5)) == 0.0
    assert rms_contact_force(with_forces([(3.0, 4.0, 0.0)] * 5)) == pytest.approx(5.0)
    assert rms_contact_force(with_forces([(1.0, 0.0, 0.0), (0.0, 0.0, 0.0)])) == pytest.approx(math.sqrt(0.5))


def test_rms_ignores_torque_and_order():
    rng = np.random.default_rng(36)
    forces = rng.normal(size=(50, 3))
    traj = with_forces(forces)
    shuffled = with_forces(forces[rng.permutation(50)])
    assert rms_contact_force(traj) == pytest.approx(rms_contact_force(shuffled), abs=1e-12)

    torqued = Trajectory(traj.poses, tuple(Wrench(w.force, (5.0, 5.0, 5.0)) for w in traj.wrenches))
    assert rms_contact_force(torqued) == rms_contact_force(traj)


def test_rms_needs_wrench():
    with pytest.raises(NoWrenchData):
        rms_contact_force(Trajectory((Pose.identity(), Pose.identity())))


# ===== reports =====

def _reference(length=4):
    return Trajectory(tuple(Pose.from_translation((0.01 * k, 0.0, 0.0)) for k in range(length)))


def _record(iteration, speed, stage_iteration, dtw, rms, stop=None):
    ref = _reference()
    measured = None if stop is not None else ref
    return IterationRecord(iteration, speed, stage_iteration, ref, measured, dtw,
                           None if dtw is None else dtw * 4, rms, stop, 1.5 * (rms or 0.0))


def _run(mode, stages):
    built = tuple(StageRecord(speed, _reference(), tuple(records), _reference())
                  for speed, records in stages)
    return RefinementRun(mode, RefinementConfig(mode=mode), built)


def synthetic_runs():
    stop = StopEvent("protective_stop", 2, 30, 120.0, "force limit exceeded")
    i2rlc = _run("i2rlc", [
        (2, [_record(1, 2, 1, 0.004, 3.0), _record(2, 2, 2, 0.002, 2.5)]),
        (3, [_record(3, 3, 1, 0.003, 2.8), _record(4, 3, 2, None, None, stop)]),
    ])
    irlc = [_run("irlc", [(speed, [_record(1, speed, 1, 0.001 * speed, 2.0)])]) for speed in (3, 2)]
    return {"i2rlc": [i2rlc], "irlc": irlc}, stop


def test_learning_curve_rows():
    runs, stop = synthetic_runs()
    report = learning_curve(runs["i2rlc"][0])

    assert list(report.curve.columns) == CURVE_COLUMNS
    assert report.curve["iteration"].tolist() == [1, 2, 3, 4]
    assert report.curve["speed"].tolist() == [2, 2, 3, 3]
    assert report.curve["stop"].tolist() == ["", "", "", stop.kind]
    assert math.isnan(report.dtw)
    assert len(report.rows) == 4
    assert report.rows[0]["dtw"] == 0.004


def test_learning_curve_of_empty_run():
    report = learning_curve(RefinementRun("irlc", RefinementConfig(mode="irlc"), ()))
    assert report.curve.empty
    assert math.isnan(report.dtw) and math.isnan(report.rms_force)


def test_comparison_grid():
    runs, _ = synthetic_runs()
    grid = comparison_grid(runs, "dtw")

    assert grid.index.tolist() == ["i2rlc", "irlc"]
    assert grid.columns.tolist() == [2, 3]
    assert grid.index.name == "method" and grid.columns.name == "speed"
    assert grid.loc["i2rlc", 2] == 0.002
    # the stopped stage reports its last safe iteration
    assert grid.loc["i2rlc", 3] == 0.003
    assert grid.loc["irlc", 2] == pytest.approx(0.002)
    assert grid.loc["irlc", 3] == pytest.approx(0.003)

    forces = comparison_grid(runs, "rms_force")
    assert forces.loc["i2rlc", 2] == 2.5


def test_comparison_grid_fills_missing_cells():
    runs, _ = synthetic_runs()
    runs["playback"] = [_run("playback", [(3, [_record(1, 3, 1, 0.01, 4.0)])])]
    grid = comparison_grid(runs)
    assert grid.index.tolist() == ["i2rlc", "irlc", "playback"]
    assert pd.isna(grid.loc["playback", 2])
    assert grid.loc["playback", 3] == 0.01


def test_comparison_grid_rejects_unknown_value():
    runs, _ = synthetic_runs()
    with pytest.raises(ValueError):
        comparison_grid(runs, "peak_force")
