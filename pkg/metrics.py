"""
Metrics Module
Spatial error (dynamic time warping over positions), RMS contact force and
per-iteration learning curves of refinement runs.

DTW value reported everywhere is the optimal cumulative Euclidean cost divided
by the length of the optimal warping path. The raw cumulative cost is kept
next to it.
"""

from dataclasses import dataclass
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from errors import NoWrenchData, TrajectoryError
from trajectory import Trajectory


CURVE_COLUMNS = ["iteration", "speed", "stage_iteration", "dtw", "dtw_cost", "rms_force", "peak_force", "stop"]
GRID_VALUES = ("dtw", "rms_force")

# backpointers
_DIAGONAL, _UP, _LEFT = 0, 1, 2


@dataclass(frozen=True)
class DTWResult:
    """
    Optimal alignment between two position sequences.

    Attributes:
        cost (float): Cumulative cost along the path (meters)
        path_length (int): Number of aligned pairs
        distance (float): cost / path_length
        path (tuple): (i, j) index pairs from (0, 0) to (len(a)-1, len(b)-1)
    """

    cost: float
    path_length: int
    distance: float
    path: Tuple[Tuple[int, int], ...]


def _window(i: int, n: int, m: int, band: Optional[int]) -> Tuple[int, int]:
    if band is None:
        return 0, m - 1
    center = i * (m - 1) / (n - 1) if n > 1 else 0.0
    return max(0, math.ceil(center - band)), min(m - 1, math.floor(center + band))


def dtw_alignment(a, b, band: Optional[int] = None) -> DTWResult:
    """
    Classic DTW with steps (1,0), (0,1), (1,1) and matched endpoints.

    Among paths of equal cumulative cost the shorter one wins.

    Args:
        a (array-like): (n, d) positions
        b (array-like): (m, d) positions
        band (int): Optional Sakoe-Chiba half-width, widened when needed so
                    that a path always exists

    Returns:
        DTWResult: Optimal alignment
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if b.ndim == 1:
        b = b[None, :]
    if len(a) == 0 or len(b) == 0:
        raise TrajectoryError("DTW needs non-empty sequences")

    n, m = len(a), len(b)
    if band is not None:
        band = max(int(band), math.ceil(max(n, m) / min(n, m)))
    cost = cdist(a, b).tolist()

    inf = math.inf
    total = [[inf] * m for _ in range(n)]
    length = [[0] * m for _ in range(n)]
    back = np.zeros((n, m), dtype=np.int8)

    for i in range(n):
        lo, hi = _window(i, n, m, band)
        row, row_len, c = total[i], length[i], cost[i]
        prev = total[i - 1] if i > 0 else None
        prev_len = length[i - 1] if i > 0 else None
        for j in range(lo, hi + 1):
            if i == 0 and j == 0:
                row[0], row_len[0] = c[0], 1
                continue

            # (cost, path length, move): cheaper first, then shorter, then diagonal
            candidates = []
            if i > 0 and j > 0:
                candidates.append((prev[j - 1], prev_len[j - 1], _DIAGONAL))
            if i > 0:
                candidates.append((prev[j], prev_len[j], _UP))
            if j > 0:
                candidates.append((row[j - 1], row_len[j - 1], _LEFT))
            best, best_len, move = min(candidates)
            if best == inf:
                continue

            row[j] = best + c[j]
            row_len[j] = best_len + 1
            back[i, j] = move

    i, j = n - 1, m - 1
    path = [(i, j)]
    while (i, j) != (0, 0):
        move = back[i, j]
        if move == _DIAGONAL:
            i, j = i - 1, j - 1
        elif move == _UP:
            i -= 1
        else:
            j -= 1
        path.append((i, j))
    path.reverse()

    final = total[n - 1][m - 1]
    steps = length[n - 1][m - 1]
    return DTWResult(final, steps, final / steps, tuple(path))


def dtw_distance(a, b, band: Optional[int] = None, normalized: bool = True) -> float:
    """Normalized DTW between position sequences (raw cumulative cost if normalized=False)."""
    result = dtw_alignment(a, b, band)
    return result.distance if normalized else result.cost


def trajectory_dtw(measured: Trajectory, target: Trajectory, band: Optional[int] = None) -> DTWResult:
    return dtw_alignment(measured.positions(), target.positions(), band)


def rms_contact_force(traj: Trajectory) -> float:
    """sqrt(mean over samples of fx² + fy² + fz²)."""
    if not traj.has_wrench:
        raise NoWrenchData(f"trajectory '{traj.label}' has no wrench channel")
    forces = traj.forces()
    return float(np.sqrt(np.mean(np.sum(forces ** 2, axis=1))))


# ===== reports =====

@dataclass(frozen=True, eq=False)
class MetricReport:
    """
    Final-iteration numbers of one run plus its learning curve.

    Attributes:
        dtw (float): Normalized DTW of the last iteration (meters)
        rms_force (float): RMS contact force of the last iteration (N)
        curve (DataFrame): One row per executed iteration (CURVE_COLUMNS)
    """

    dtw: float
    rms_force: float
    curve: pd.DataFrame

    @property
    def rows(self) -> List[dict]:
        return self.curve.to_dict(orient="records")


def learning_curve(run) -> MetricReport:
    """
    Learning curve of a refinement run.

    Args:
        run (RefinementRun): Complete or truncated run

    Returns:
        MetricReport: one row per executed iteration; the row whose playback
                      or update was stopped carries the stop kind
    """
    rows = []
    for record in run.records:
        rows.append({
            "iteration": record.iteration,
            "speed": record.speed,
            "stage_iteration": record.stage_iteration,
            "dtw": record.dtw if record.dtw is not None else np.nan,
            "dtw_cost": record.dtw_cost if record.dtw_cost is not None else np.nan,
            "rms_force": record.rms_force if record.rms_force is not None else np.nan,
            "peak_force": record.peak_force if record.peak_force is not None else np.nan,
            "stop": record.stop.kind if record.stop is not None else "",
        })

    curve = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    if curve.empty:
        return MetricReport(np.nan, np.nan, curve)
    last = curve.iloc[-1]
    return MetricReport(float(last["dtw"]), float(last["rms_force"]), curve)


def comparison_grid(runs_by_method: Dict[str, Sequence], value: str = "dtw") -> pd.DataFrame:
    """
    Method x speed table of final-iteration values.

    Every stage of every run contributes its final record, so one I2RLC run
    fills a whole row while IRLC and playback contribute one run per speed.

    Args:
        runs_by_method (dict): method name -> list of RefinementRun
        value (str): 'dtw' or 'rms_force'

    Returns:
        DataFrame: rows = methods (insertion order), columns = speeds (ascending)
    """
    if value not in GRID_VALUES:
        raise ValueError(f"value must be one of {GRID_VALUES}, got '{value}'")

    cells = {}
    for method, runs in runs_by_method.items():
        row = {}
        for run in runs:
            for stage in run.stages:
                record = stage.final_record
                if record is None:
                    continue
                number = getattr(record, value)
                row[stage.speed] = number if number is not None else np.nan
        cells[method] = row

    speeds = sorted({speed for row in cells.values() for speed in row})
    grid = pd.DataFrame([[row.get(speed, np.nan) for speed in speeds] for row in cells.values()],
                        index=list(cells), columns=speeds, dtype=float)
    grid.index.name = "method"
    grid.columns.name = "speed"
    return grid
