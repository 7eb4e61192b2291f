"""
Saver Module
Writes every artifact of a command into one output directory:
- demonstration pairs and refined references (trajectory files)
- results.json with config echo, seed and per-iteration metric rows
- learning-curve tables (CSV)
- manifest.json with the sha256 of every written file

Nothing written here carries a timestamp, so identical runs produce
byte-identical directories.
"""

import hashlib
import json
from pathlib import Path
from typing import Dict, List, Optional

import config
from errors import SchemaError
from metrics import learning_curve
from plant import StopEvent
from refinement import IterationRecord, RefinementConfig, RefinementRun, StageRecord
from trajectory import Trajectory, load_trajectory, save_trajectory


RESULTS_FILE = "results.json"
MANIFEST_FILE = "manifest.json"
DEMO_MEASURED_FILE = "demo_measured.csv"
DEMO_REF_FILE = "demo_ref.csv"


def _write_json(data, path: Path) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")
    return path


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def run_directory(run: RefinementRun) -> str:
    """Stable sub-directory name of a run, e.g. 'irlc_10x' or 'i2rlc_2-10x'."""
    speeds = run.speeds
    if run.mode == "i2rlc":
        return f"i2rlc_{speeds[0]}-{run.config.max_speed}x" if speeds else "i2rlc"
    return f"{run.mode}_{speeds[0]}x" if speeds else run.mode


class ResultsSaver:
    """Writes trajectories, results and the manifest of one output directory."""

    def __init__(self, output_dir: str = "output", verbose: bool = True):
        """
        Initialize saver with output directory.

        Args:
            output_dir (str): Directory to write into (created if missing)
            verbose (bool): Print a status line per written artifact
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.verbose = verbose
        if verbose:
            print(f"✓ Output directory: {self.output_dir}")

    def _relative(self, path: Path) -> str:
        return path.relative_to(self.output_dir).as_posix()

    def save_trajectory(self, traj: Trajectory, relative: str) -> str:
        path = save_trajectory(traj, self.output_dir / relative)
        return self._relative(path)

    def save_demo(self, demo_measured: Trajectory, demo_ref: Trajectory) -> Dict[str, str]:
        """Write the demonstration pair; returns their relative paths."""
        files = {
            "measured": self.save_trajectory(demo_measured, DEMO_MEASURED_FILE),
            "reference": self.save_trajectory(demo_ref, DEMO_REF_FILE),
        }
        if self.verbose:
            print(f"✓ Demonstration saved: {len(demo_ref)} samples at {demo_ref.rate_hz:g} Hz")
        return files

    def save_run(self, run: RefinementRun, curves: bool = True) -> dict:
        """
        Write the per-stage trajectories and learning curve of a run.

        Per stage: the target (downsampled demo measurement), the final refined
        reference and the measurement of the final record.

        Args:
            run (RefinementRun): Completed or truncated run
            curves (bool): Also write the learning-curve CSV

        Returns:
            dict: Results entry for the run (relative paths + metric rows)
        """
        folder = run_directory(run)
        stages = []
        for stage in run.stages:
            prefix = f"{folder}/stage_{stage.speed:02d}"
            final = stage.final_record
            measured = None
            if final is not None and final.measured is not None:
                measured = self.save_trajectory(final.measured, f"{prefix}_measured.csv")
            stages.append({
                "speed": stage.speed,
                "stopped": stage.stopped,
                "target": self.save_trajectory(stage.target, f"{prefix}_target.csv"),
                "final_reference": self.save_trajectory(stage.final_reference, f"{prefix}_reference.csv"),
                "final_measured": measured,
                "final_iteration": final.iteration if final is not None else None,
                "iterations": [record.to_row() for record in stage.records],
            })

        curve_file = None
        if curves:
            curve_path = self.output_dir / folder / "learning_curve.csv"
            curve_path.parent.mkdir(parents=True, exist_ok=True)
            learning_curve(run).curve.to_csv(curve_path, index=False, float_format=config.FLOAT_FORMAT,
                                              lineterminator="\n")
            curve_file = self._relative(curve_path)

        stop = run.first_stop
        if self.verbose:
            marker = "⚠" if run.stopped else "✓"
            print(f"{marker} {run.label}: {run.playback_count} playbacks saved to {folder}/")
        return {
            "mode": run.mode,
            "label": run.label,
            "refinement": run.config.to_dict(),
            "playback_count": run.playback_count,
            "stopped": run.stopped,
            "stop": stop.to_dict() if stop is not None else None,
            "learning_curve": curve_file,
            "stages": stages,
        }

    def save_results(self, command: str, runs: List[dict], seed: int, echo: dict) -> Path:
        """
        Write results.json.

        Args:
            command (str): CLI subcommand that produced the runs
            runs (list): Entries from save_run
            seed (int): Seed of the campaign
            echo (dict): Config echo (task, plant sections, demo files...)
        """
        data = {
            "format_version": config.FORMAT_VERSION,
            "command": command,
            "seed": seed,
            "config": echo,
            "runs": runs,
        }
        path = _write_json(data, self.output_dir / RESULTS_FILE)
        if self.verbose:
            print(f"✓ Results saved: {path.name}")
        return path

    def write_manifest(self, command: str, echo: dict, seed: int, extra: Optional[dict] = None) -> Path:
        """
        Hash every file below the output directory into manifest.json.

        Args:
            command (str): CLI subcommand
            echo (dict): Config echo with all defaults resolved
            seed (int): Seed of the command
            extra (dict): Additional top-level entries (e.g. dataset episodes)

        Returns:
            Path: Written manifest
        """
        files = {}
        for path in sorted(self.output_dir.rglob("*")):
            if path.is_file() and path.name != MANIFEST_FILE:
                files[self._relative(path)] = file_sha256(path)

        manifest = {
            "format_version": config.FORMAT_VERSION,
            "command": command,
            "seed": seed,
            "config": echo,
            "files": files,
        }
        if extra:
            manifest.update(extra)
        path = _write_json(manifest, self.output_dir / MANIFEST_FILE)
        if self.verbose:
            print(f"📁 Manifest: {len(files)} file(s) hashed")
        return path


# ===== loading =====

def load_results(results_dir) -> dict:
    """Read results.json of an output directory."""
    path = Path(results_dir) / RESULTS_FILE
    if not path.exists():
        raise SchemaError(RESULTS_FILE, f"{results_dir}: no {RESULTS_FILE}")
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if data.get("format_version") != config.FORMAT_VERSION:
        raise SchemaError("format_version", f"{path}: unsupported format_version {data.get('format_version')}")
    return data


def _record_from_row(row: dict, reference=None, measured=None) -> IterationRecord:
    stop = StopEvent.from_dict(row["stop"]) if row.get("stop") else None
    return IterationRecord(row["iteration"], row["speed"], row["stage_iteration"], reference, measured,
                           row.get("dtw"), row.get("dtw_cost"), row.get("rms_force"), stop,
                           row.get("peak_force"))


def run_from_entry(results_dir, entry: dict) -> RefinementRun:
    """
    Rebuild a RefinementRun from a results entry.

    Only the final record of each stage gets its trajectories back; the other
    records carry metrics only.
    """
    results_dir = Path(results_dir)
    stages = []
    for stage in entry["stages"]:
        reference = load_trajectory(results_dir / stage["final_reference"])
        measured = load_trajectory(results_dir / stage["final_measured"]) if stage["final_measured"] else None
        records = tuple(
            _record_from_row(row, reference, measured)
            if row["iteration"] == stage["final_iteration"] else _record_from_row(row)
            for row in stage["iterations"]
        )
        stages.append(StageRecord(stage["speed"], load_trajectory(results_dir / stage["target"]),
                                  records, reference))
    return RefinementRun(entry["mode"], RefinementConfig.from_dict(entry["refinement"]),
                         tuple(stages), entry["label"])
