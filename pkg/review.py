"""
Review Module
Operator-facing summaries of demonstrations, refinement runs and comparison
grids, printed after each command.
"""

import math
from typing import Dict, List

import numpy as np
import pandas as pd

from metrics import rms_contact_force
from trajectory import Trajectory


class RunReviewer:
    """Prints what a command produced so the operator can judge it at a glance."""

    @staticmethod
    def display_demo(demo_measured: Trajectory, demo_ref: Trajectory, task_kind: str) -> None:
        """
        Summarize a synthesized demonstration.

        Args:
            demo_measured (Trajectory): Executed demonstration
            demo_ref (Trajectory): Demonstration reference
            task_kind (str): Task name
        """
        print("\n" + "="*80)
        print(f"👀 DEMONSTRATION - {task_kind}")
        print("="*80)
        magnitudes = np.linalg.norm(demo_measured.forces(), axis=1)
        path = demo_ref.positions()
        length = float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())

        print(f"Samples:            {len(demo_ref)} at {demo_ref.rate_hz:g} Hz ({demo_ref.duration_s:.2f} s)")
        print(f"Path length:        {length * 1000:.1f} mm")
        print(f"RMS contact force:  {rms_contact_force(demo_measured):.2f} N")
        print(f"Peak contact force: {magnitudes.max(initial=0.0):.2f} N")
        print(f"In contact:         {float((magnitudes > 0).mean()) * 100:.0f}% of samples")
        print("="*80)

    @staticmethod
    def display_run(run) -> None:
        """
        Per-stage final DTW, RMS force and stop events of a run.

        Args:
            run (RefinementRun): Completed or truncated run
        """
        print("\n" + "="*80)
        print(f"📊 {run.label.upper()} - {run.playback_count} playback(s)")
        print("="*80)
        print(f"{'speed':>6} {'iters':>6} {'final DTW (mm)':>16} {'RMS force (N)':>15}  status")
        print("-"*80)

        for stage in run.stages:
            record = stage.final_record
            dtw = record.dtw * 1000 if record is not None and record.dtw is not None else math.nan
            rms = record.rms_force if record is not None and record.rms_force is not None else math.nan
            status = "✓"
            for r in stage.records:
                if r.stop is not None:
                    status = f"⚠ {r.stop.kind} (iteration {r.iteration}, sample {r.stop.sample_index})"
            print(f"{stage.speed:>5}x {len(stage.records):>6} {dtw:>16.3f} {rms:>15.2f}  {status}")

        print("="*80)
        if run.stopped:
            print(f"⚠ Run stopped: {run.first_stop.message}")

    @staticmethod
    def display_grid(title: str, grid: pd.DataFrame, scale: float = 1.0, unit: str = "") -> None:
        """Method x speed table."""
        print("\n" + "="*80)
        print(f"📊 {title}" + (f" ({unit})" if unit else ""))
        print("="*80)
        print((grid * scale).to_string(float_format=lambda v: f"{v:.3f}", na_rep="-"))
        print("="*80)

    @staticmethod
    def display_dataset(episodes: List, out_dir) -> None:
        valid = [e for e in episodes if e.valid]
        print("\n" + "="*80)
        print(f"🎲 DATASET - {len(valid)}/{len(episodes)} valid episode(s) in {out_dir}")
        print("="*80)
        for episode in episodes:
            marker = "✓" if episode.valid else "⚠"
            note = "" if episode.valid else f"  excluded: {episode.stop.message if episode.stop else 'too short'}"
            print(f"{marker} {episode.stem}  seed {episode.seed}{note}")
        print("="*80)

    @staticmethod
    def summary_lines(runs_by_method: Dict[str, List]) -> List[str]:
        """One line per run: label, playbacks and stop status."""
        lines = []
        for runs in runs_by_method.values():
            for run in runs:
                state = f"stopped ({run.stop_kind})" if run.stopped else "completed"
                lines.append(f"{run.label}: {run.playback_count} playback(s), {state}")
        return lines
