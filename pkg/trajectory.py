"""
Trajectory Module
Time-indexed pose/wrench sequences, n-fold downsampling, uniform geodesic
subsampling, tangent-space Gaussian noise and the trajectory file format.

FILE FORMAT (UTF-8 CSV, version 1):
    line 1:  "# " + JSON header {"format_version", "rate_hz", "label", "has_wrench"}
    line 2:  column header  index,tx,ty,tz,qw,qx,qy,qz[,fx,fy,fz,mx,my,mz]
    line 3+: one row per sample, floats written with 17 significant digits
"""

from dataclasses import dataclass, field
import json
import re
from pathlib import Path
from typing import Iterator, Optional, Tuple

import numpy as np
import pandas as pd

import config
from errors import ParseError, SchemaError, TooShort, TrajectoryError
from geometry import Pose, Twist, compose, geodesic_interpolate, pose_exp


POSE_COLUMNS = ["tx", "ty", "tz", "qw", "qx", "qy", "qz"]
WRENCH_COLUMNS = ["fx", "fy", "fz", "mx", "my", "mz"]
HEADER_FIELDS = ("format_version", "rate_hz", "label", "has_wrench")


@dataclass(frozen=True, eq=False)
class Wrench:
    """Force (N) and torque (N·m), both 3-vectors."""

    force: np.ndarray
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        force = np.array(self.force, dtype=float).reshape(3)
        torque = np.array(self.torque, dtype=float).reshape(3)
        if not (np.all(np.isfinite(force)) and np.all(np.isfinite(torque))):
            raise TrajectoryError("wrench components must be finite")
        force.setflags(write=False)
        torque.setflags(write=False)
        object.__setattr__(self, "force", force)
        object.__setattr__(self, "torque", torque)

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, x) -> "Wrench":
        x = np.asarray(x, dtype=float).reshape(6)
        return cls(x[:3], x[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    def force_norm(self) -> float:
        return float(np.linalg.norm(self.force))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Fixed-rate sequence of poses with an optional, uniformly present wrench channel.

    Attributes:
        poses (tuple): Pose per sample
        wrenches (tuple | None): Wrench per sample, or None when absent
        rate_hz (float): Sample rate
        label (str): Free text
    """

    poses: Tuple[Pose, ...]
    wrenches: Optional[Tuple[Wrench, ...]] = None
    rate_hz: float = config.RECORD_RATE_HZ
    label: str = ""

    def __post_init__(self):
        poses = tuple(self.poses)
        object.__setattr__(self, "poses", poses)
        if len(poses) < 2:
            raise TooShort(f"trajectory needs at least 2 samples, got {len(poses)}")
        if not self.rate_hz > 0:
            raise TrajectoryError(f"rate_hz must be positive, got {self.rate_hz}")

        if self.wrenches is not None:
            wrenches = tuple(self.wrenches)
            if len(wrenches) != len(poses) or any(w is None for w in wrenches):
                raise TrajectoryError("wrench channel must be present on every sample or none")
            object.__setattr__(self, "wrenches", wrenches)

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def has_wrench(self) -> bool:
        return self.wrenches is not None

    @property
    def duration_s(self) -> float:
        return (len(self) - 1) / self.rate_hz

    @property
    def samples(self) -> Iterator[Tuple[Pose, Optional[Wrench]]]:
        wrenches = self.wrenches if self.has_wrench else (None,) * len(self)
        return zip(self.poses, wrenches)

    def positions(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses])

    def forces(self) -> np.ndarray:
        if not self.has_wrench:
            return np.zeros((0, 3))
        return np.array([w.force for w in self.wrenches])

    def with_label(self, label: str) -> "Trajectory":
        return Trajectory(self.poses, self.wrenches, self.rate_hz, label)

    def without_wrench(self) -> "Trajectory":
        return Trajectory(self.poses, None, self.rate_hz, self.label)


# ===== resampling =====

def downsample(traj: Trajectory, n: int) -> Trajectory:
    """
    Keep every n-th sample starting from the first one.

    Output sample k is input sample min(k·n, T-1) for k < floor(T/n); the rate is
    unchanged, so playing the result at the same rate realizes an n-fold speedup.

    Args:
        traj (Trajectory): Source trajectory (length T)
        n (int): Speedup factor >= 1

    Returns:
        Trajectory: floor(T/n) samples

    Raises:
        TooShort: floor(T/n) < 2
    """
    if n < 1:
        raise TrajectoryError(f"speedup must be >= 1, got {n}")
    if n == 1:
        return traj

    T = len(traj)
    length = T // n
    if length < 2:
        raise TooShort(f"downsampling {T} samples by {n} leaves {length}")

    indices = [min(k * n, T - 1) for k in range(length)]
    wrenches = tuple(traj.wrenches[i] for i in indices) if traj.has_wrench else None
    return Trajectory(
        tuple(traj.poses[i] for i in indices),
        wrenches,
        traj.rate_hz,
        f"{traj.label}@{n}x" if traj.label else f"@{n}x",
    )


def subsample_uniform(traj: Trajectory, target_len: int, coupled: bool = True) -> Trajectory:
    """
    Resample to target_len samples at fractional indices k·(L-1)/(target_len-1).

    Poses between samples are geodesically interpolated; wrenches linearly.
    Endpoints are returned as the original objects.
    """
    if target_len < 2:
        raise TooShort(f"target length must be >= 2, got {target_len}")

    L = len(traj)
    if target_len == L:
        return traj

    denominator = target_len - 1
    poses = []
    wrenches = [] if traj.has_wrench else None
    for k in range(target_len):
        # exact integer split of k*(L-1)/(target_len-1)
        i, remainder = divmod(k * (L - 1), denominator)
        s = remainder / denominator
        if remainder == 0:
            poses.append(traj.poses[i])
            if wrenches is not None:
                wrenches.append(traj.wrenches[i])
            continue
        poses.append(geodesic_interpolate(traj.poses[i], traj.poses[i + 1], s, coupled=coupled))
        if wrenches is not None:
            a, b = traj.wrenches[i].as_vector(), traj.wrenches[i + 1].as_vector()
            wrenches.append(Wrench.from_vector((1.0 - s) * a + s * b))

    return Trajectory(tuple(poses), tuple(wrenches) if wrenches is not None else None,
                      traj.rate_hz, traj.label)


def add_pose_noise(traj: Trajectory, sigma_pos: float, sigma_rot: float, seed: int,
                   coupled: bool = True) -> Trajectory:
    """
    Right-perturb every pose by exp of a zero-mean Gaussian twist.

    Args:
        traj (Trajectory): Reference to perturb
        sigma_pos (float): Std of the translational tangent part (m)
        sigma_rot (float): Std of the rotational tangent part (rad)
        seed (int): RNG seed

    Returns:
        Trajectory: Perturbed copy (wrench channel unchanged)
    """
    if sigma_pos < 0 or sigma_rot < 0:
        raise TrajectoryError("noise sigmas must be non-negative")
    if sigma_pos == 0 and sigma_rot == 0:
        return traj

    rng = np.random.default_rng(seed)
    v = rng.normal(0.0, sigma_pos, size=(len(traj), 3))
    w = rng.normal(0.0, sigma_rot, size=(len(traj), 3))

    poses = tuple(
        compose(pose, pose_exp(Twist(v[k], w[k]), coupled=coupled))
        for k, pose in enumerate(traj.poses)
    )
    return Trajectory(poses, traj.wrenches, traj.rate_hz, traj.label)


# ===== file I/O =====

def save_trajectory(traj: Trajectory, path) -> Path:
    """
    Write a trajectory file (see module docstring for the layout).

    Args:
        traj (Trajectory): Trajectory to write
        path (str | Path): Destination file

    Returns:
        Path: Written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    header = {
        "format_version": config.FORMAT_VERSION,
        "has_wrench": traj.has_wrench,
        "label": traj.label,
        "rate_hz": float(traj.rate_hz),
    }

    rows = np.array([np.concatenate([p.translation, p.to_quaternion()]) for p in traj.poses])
    frame = pd.DataFrame(rows, columns=POSE_COLUMNS)
    if traj.has_wrench:
        frame[WRENCH_COLUMNS] = np.array([w.as_vector() for w in traj.wrenches])
    frame.insert(0, "index", np.arange(len(traj)))

    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("# " + json.dumps(header, sort_keys=True) + "\n")
        frame.to_csv(f, index=False, float_format=config.FLOAT_FORMAT, lineterminator="\n")

    return path


def _read_header(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()

    if not first.startswith("#"):
        raise SchemaError("format_version", f"{path}: missing header record")
    try:
        header = json.loads(first[1:])
    except json.JSONDecodeError as e:
        raise ParseError(1, f"header is not valid JSON ({e.msg})") from e
    if not isinstance(header, dict):
        raise ParseError(1, "header must be a JSON object")

    for name in HEADER_FIELDS:
        if name not in header:
            raise SchemaError(name, f"{path}: header is missing '{name}'")
    if header["format_version"] != config.FORMAT_VERSION:
        raise SchemaError("format_version", f"{path}: unsupported format_version {header['format_version']}")
    return header


def load_trajectory(path) -> Trajectory:
    """
    Read a trajectory file.

    Raises:
        SchemaError: missing header field or column
        ParseError: malformed row (with its 1-based file line number)
    """
    path = Path(path)
    header = _read_header(path)

    try:
        frame = pd.read_csv(path, skiprows=1, dtype=str,
                            keep_default_na=False)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line = int(match.group(1)) if match else None
        raise ParseError(line, str(e)) from e
    except pd.errors.EmptyDataError as e:
        raise SchemaError("index", f"{path}: no column header") from e

    columns = ["index"] + POSE_COLUMNS + (WRENCH_COLUMNS if header["has_wrench"] else [])
    for name in columns:
        if name not in frame.columns:
            raise SchemaError(name, f"{path}: missing column '{name}'")

    # line 1 is the header record, line 2 the column names
    numeric = frame[columns].apply(lambda col: pd.to_numeric(col, errors="coerce"))
    bad_rows = numeric.isna().any(axis=1).to_numpy().nonzero()[0]
    if len(bad_rows):
        raise ParseError(int(bad_rows[0]) + 3, "non-numeric or missing value")

    values = np.array([[float(cell) for cell in row] for row in frame[columns].itertuples(index=False)])
    expected = np.arange(len(values))
    if not np.array_equal(values[:, 0], expected):
        bad = int(np.nonzero(values[:, 0] != expected)[0][0])
        raise ParseError(bad + 3, f"index {values[bad, 0]:g} out of sequence")

    poses = tuple(Pose.from_quaternion(row[4:8], row[1:4]) for row in values)
    wrenches = None
    if header["has_wrench"]:
        wrenches = tuple(Wrench.from_vector(row[8:14]) for row in values)

    return Trajectory(poses, wrenches, float(header["rate_hz"]), str(header["label"]))
