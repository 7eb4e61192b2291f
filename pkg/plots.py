"""
Plots Module
Static PNG figures of a comparison: learning curves (DTW per iteration) and
XY overlays of the final executions against the downsampled demonstration.
"""

from pathlib import Path
from typing import Dict, List, Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from metrics import learning_curve


METHOD_STYLES = {
    "playback": {"color": "tab:gray", "linestyle": "--", "marker": "x"},
    "irlc": {"color": "tab:blue", "linestyle": "-", "marker": "o"},
    "i2rlc": {"color": "tab:red", "linestyle": "-", "marker": "s"},
}


def _style(method: str) -> dict:
    return dict(METHOD_STYLES.get(method, {"linestyle": "-"}))


def _runs_at(runs, speed: int):
    return [run for run in runs if speed in run.speeds]


def plot_learning_curves(runs_by_method: Dict[str, List], path, speed: Optional[int] = None) -> Path:
    """
    DTW (mm) against iteration.

    IRLC is drawn at `speed` (default: the highest speed present), I2RLC over
    its whole campaign with dotted stage boundaries, playback as a flat line.
    Stopped iterations get a red cross.
    """
    speeds = sorted({s for runs in runs_by_method.values() for run in runs for s in run.speeds})
    speed = speed if speed is not None else (speeds[-1] if speeds else None)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    longest = 1
    for method, runs in runs_by_method.items():
        selected = runs if method == "i2rlc" else _runs_at(runs, speed)
        for run in selected:
            curve = learning_curve(run).curve
            if curve.empty:
                continue
            longest = max(longest, int(curve["iteration"].max()))
            style = _style(method)

            if method == "playback":
                ax.axhline(curve["dtw"].iloc[-1] * 1000, color=style["color"], linestyle="--",
                           label=f"playback {speed}x")
                continue

            ax.plot(curve["iteration"], curve["dtw"] * 1000, label=f"{method} ({run.label})", **style)
            stopped = curve[curve["stop"] != ""]
            if not stopped.empty:
                ax.plot(stopped["iteration"], stopped["dtw"] * 1000, "rX", markersize=12, label="stop")
            if method == "i2rlc":
                boundaries = curve.groupby("speed")["iteration"].min().iloc[1:]
                for boundary in boundaries:
                    ax.axvline(boundary - 0.5, color="tab:red", alpha=0.2, linestyle=":")

    ax.set_xlim(0.5, longest + 0.5)
    ax.set_xlabel("Iteration")
    ax.set_ylabel("DTW (mm)")
    ax.set_title(f"Learning curves ({speed}x)" if speed else "Learning curves")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_xy_overlay(runs_by_method: Dict[str, List], path, speed: Optional[int] = None) -> Path:
    """Final executed XY path of every method at one speed over the target path."""
    speeds = sorted({s for runs in runs_by_method.values() for run in runs for s in run.speeds})
    speed = speed if speed is not None else (speeds[-1] if speeds else None)

    fig, ax = plt.subplots(figsize=(6, 6))
    target_drawn = False
    for method, runs in runs_by_method.items():
        for run in _runs_at(runs, speed):
            stage = next(s for s in run.stages if s.speed == speed)
            if not target_drawn:
                xy = stage.target.positions()
                ax.plot(xy[:, 0] * 1000, xy[:, 1] * 1000, "k:", linewidth=2, label="demo (downsampled)")
                target_drawn = True
            record = stage.final_record
            if record is None or record.measured is None:
                continue
            xy = record.measured.positions()
            style = _style(method)
            style.pop("marker", None)
            ax.plot(xy[:, 0] * 1000, xy[:, 1] * 1000, label=f"{method} {speed}x", **style)

    ax.set_xlabel("X (mm)")
    ax.set_ylabel("Y (mm)")
    ax.set_title(f"Executed paths at {speed}x" if speed else "Executed paths")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
