"""
Demonstration Acceleration - Main Orchestrator
Command-line pipeline around the refinement library:

1. demo:     synthesize a 1x demonstration pair for a task
2. refine:   playback / IRLC / I2RLC campaign on a saved demonstration
3. compare:  method x speed grids, workbook and plots over several campaigns
4. dataset:  noise-augmented rollouts of a refined reference

Every command writes into its own output directory and finishes with a
manifest.json (config echo, seed, sha256 of every file).

Exit codes: 0 clean, 2 config/IO error, 3 stopped run, 4 simulation fault.

Usage:
    python main.py demo --task flat_erase --out out/demo
    python main.py refine --demo out/demo --mode i2rlc --max-speed 10 --out out/i2rlc
    python main.py refine --demo out/demo --mode irlc --speed 10 --out out/irlc
    python main.py refine --demo out/demo --mode playback --speed 2 3 4 5 6 7 8 9 10 --out out/playback
    python main.py compare out/playback out/irlc out/i2rlc --out out/compare
    python main.py dataset --reference out/i2rlc/i2rlc_2-10x/stage_06_reference.csv --demo out/demo --out out/dataset
"""

import argparse
from dataclasses import dataclass, field
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd

import config
from dataset import build_rollout_dataset
from errors import AccelerationError, ConfigError, DemoSafetyError, SimFault
from excel_writer import ComparisonWorkbook
from metrics import comparison_grid, learning_curve
from plant import PlantContext
from plots import plot_learning_curves, plot_xy_overlay
from refinement import MODES, RefinementConfig, run_comparison
from review import RunReviewer
from saver import (DEMO_MEASURED_FILE, DEMO_REF_FILE, ResultsSaver, load_results,
                   run_from_entry)
from scenarios import (TASK_KINDS, TaskSpec, build_context, generate_demo, load_scenario,
                       save_scenario, task_by_kind, task_to_dict)
from trajectory import load_trajectory


SCENARIO_FILE = "scenario.yaml"
METHOD_ORDER = ("playback", "irlc", "i2rlc")


@dataclass
class CampaignConfig:
    """Resolved inputs of one command (what gets echoed into the manifest)."""

    task: TaskSpec
    context: PlantContext
    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    out: Path = Path("output")
    seed: int = config.DEFAULT_SEED
    emit: Tuple[str, ...] = config.EMIT_CHOICES

    def echo(self) -> dict:
        data = {"task": task_to_dict(self.task), "refinement": self.refinement.to_dict(),
                "emit": list(self.emit)}
        data.update(self.context.to_sections())
        return data


def _emit_list(text: str) -> Tuple[str, ...]:
    items = tuple(item.strip() for item in text.split(",") if item.strip())
    for item in items:
        if item not in config.EMIT_CHOICES:
            raise argparse.ArgumentTypeError(f"unknown emit '{item}' (choose from {', '.join(config.EMIT_CHOICES)})")
    return items


class AccelerationPipeline:
    """Runs one CLI command end to end and maps its outcome to an exit code."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        print("\n" + "="*80)
        print(f"⚡ DEMONSTRATION ACCELERATION - {args.command}")
        print("="*80)

    # ----- scenario resolution -----

    def resolve_scenario(self, demo_dir: Optional[Path] = None) -> Tuple[TaskSpec, PlantContext]:
        """
        Scenario precedence: --config, then the demo directory's scenario file,
        then the default task named by --task. --force-limit overrides the result.
        """
        args = self.args
        if getattr(args, "config", None):
            task, context = load_scenario(args.config)
            print(f"✓ Scenario loaded: {args.config}")
        elif demo_dir is not None and (demo_dir / SCENARIO_FILE).exists():
            task, context = load_scenario(demo_dir / SCENARIO_FILE)
            print(f"✓ Scenario loaded: {demo_dir / SCENARIO_FILE}")
        else:
            task = task_by_kind(args.task)
            context = build_context(task)
            print(f"✓ Default scenario: {task.kind}")

        if getattr(args, "force_limit", None) is not None:
            context = context.replace(force_limit=args.force_limit)
            print(f"⚠ Force limit overridden: {args.force_limit} N")
        return task, context

    def refinement_config(self) -> RefinementConfig:
        args = self.args
        return RefinementConfig(
            mode=args.mode,
            max_speed=args.max_speed,
            iterations_per_speed=args.iters,
            learning_gain=args.gain,
            irlc_target_speed=max(args.speed) if args.speed else None,
            strict_iterations=args.strict_iterations,
            continue_after_stop=args.continue_after_stop,
        )

    # ----- commands -----

    def cmd_demo(self) -> int:
        args = self.args
        task, context = self.resolve_scenario()
        context = context.replace(seed=args.seed)
        campaign = CampaignConfig(task, context, out=Path(args.out), seed=args.seed)

        print(f"\n[Step 1/2] 🖐  Synthesizing {task.kind} demonstration (seed {args.seed})...")
        print("-" * 40)
        demo_measured, demo_ref = generate_demo(task, seed=args.seed, context=context)
        RunReviewer.display_demo(demo_measured, demo_ref, task.kind)

        print("\n[Step 2/2] 💾 Saving...")
        print("-" * 40)
        saver = ResultsSaver(campaign.out)
        files = saver.save_demo(demo_measured, demo_ref)
        save_scenario(task, context, campaign.out / SCENARIO_FILE)
        saver.write_manifest("demo", campaign.echo(), args.seed, extra={"demo": files})
        return config.EXIT_OK

    def cmd_refine(self) -> int:
        args = self.args
        demo_dir = Path(args.demo)
        task, context = self.resolve_scenario(demo_dir)
        cfg = self.refinement_config()
        campaign = CampaignConfig(task, context, cfg, Path(args.out), args.seed, args.emit)

        demo = (load_trajectory(demo_dir / DEMO_MEASURED_FILE), load_trajectory(demo_dir / DEMO_REF_FILE))
        print(f"✓ Demonstration loaded: {len(demo[1])} samples from {demo_dir}")

        speeds = [cfg.max_speed] if cfg.mode == "i2rlc" else (args.speed or [cfg.max_speed])
        runs = run_comparison(demo, speeds, cfg, context, workers=args.workers, methods=[cfg.mode],
                              verbose=args.workers <= 1)[cfg.mode]

        saver = ResultsSaver(campaign.out)
        entries = []
        for run in runs:
            RunReviewer.display_run(run)
            entries.append(saver.save_run(run, curves="curves" in campaign.emit))

        echo = campaign.echo()
        echo["demo"] = demo_dir.as_posix()
        saver.save_results("refine", entries, args.seed, echo)
        saver.write_manifest("refine", echo, args.seed)

        kinds = {run.stop_kind for run in runs if run.stopped}
        if "fault" in kinds:
            print("❌ Refinement ended with a simulation fault")
            return config.EXIT_SIM_FAULT
        if kinds:
            print("⚠ Refinement ended with a protective stop")
            return config.EXIT_STOPPED
        print("\n✓ Refinement complete")
        return config.EXIT_OK

    def cmd_compare(self) -> int:
        args = self.args
        if len(args.results) < 2:
            raise ConfigError("compare needs at least two result directories")

        runs_by_method = {}
        task_kind = None
        echo = {"results": []}
        for results_dir in args.results:
            data = load_results(results_dir)
            kind = data["config"]["task"]["kind"]
            if task_kind is not None and kind != task_kind:
                raise ConfigError(f"mismatched tasks: {task_kind} vs {kind} ({results_dir})")
            task_kind = kind
            echo["results"].append(Path(results_dir).as_posix())
            for entry in data["runs"]:
                runs_by_method.setdefault(entry["mode"], []).append(run_from_entry(results_dir, entry))
            print(f"✓ Loaded {len(data['runs'])} run(s) from {results_dir}")

        runs_by_method = {m: runs_by_method[m] for m in METHOD_ORDER if m in runs_by_method}
        echo["task"] = task_kind
        echo["emit"] = list(args.emit)

        out = Path(args.out)
        saver = ResultsSaver(out)
        dtw_grid = comparison_grid(runs_by_method, "dtw")
        force_grid = comparison_grid(runs_by_method, "rms_force")
        RunReviewer.display_grid("Final-iteration DTW", dtw_grid, 1000.0, "mm")
        RunReviewer.display_grid("Final-iteration RMS contact force", force_grid, 1.0, "N")

        if "tables" in args.emit:
            dtw_grid.to_csv(out / "dtw_grid.csv", float_format=config.FLOAT_FORMAT, lineterminator="\n")
            force_grid.to_csv(out / "rms_force_grid.csv", float_format=config.FLOAT_FORMAT, lineterminator="\n")
            workbook = ComparisonWorkbook(str(out / "comparison.xlsx"))
            workbook.add_grid("DTW (mm)", dtw_grid, scale=1000.0)
            workbook.add_grid("RMS force (N)", force_grid, number_format="0.00")
            for method, runs in runs_by_method.items():
                for run in runs:
                    workbook.add_table(run.label.replace("@", " ")[:31], learning_curve(run).curve)
            workbook.save()

        if "curves" in args.emit:
            frames = []
            for method, runs in runs_by_method.items():
                for run in runs:
                    curve = learning_curve(run).curve
                    curve.insert(0, "run", run.label)
                    curve.insert(0, "method", method)
                    frames.append(curve)
            pd.concat(frames, ignore_index=True).to_csv(out / "learning_curves.csv", index=False,
                                                       float_format=config.FLOAT_FORMAT, lineterminator="\n")

        if "plots" in args.emit:
            plot_learning_curves(runs_by_method, out / "learning_curves.png")
            plot_xy_overlay(runs_by_method, out / "xy_overlay.png")
            print("✓ Plots saved: learning_curves.png, xy_overlay.png")

        for line in RunReviewer.summary_lines(runs_by_method):
            print(f"  • {line}")
        saver.write_manifest("compare", echo, args.seed)
        return config.EXIT_OK

    def cmd_dataset(self) -> int:
        args = self.args
        demo_dir = Path(args.demo) if args.demo else None
        task, context = self.resolve_scenario(demo_dir)
        reference = load_trajectory(args.reference)
        print(f"✓ Reference loaded: {len(reference)} samples from {args.reference}")

        campaign = CampaignConfig(task, context, out=Path(args.out), seed=args.seed)
        echo = campaign.echo()
        echo["reference"] = Path(args.reference).as_posix()
        episodes = build_rollout_dataset(reference, context, args.rollouts, args.sigma_pos, args.sigma_rot,
                                         args.seed, campaign.out, args.workers, echo=echo, verbose=True)
        RunReviewer.display_dataset(episodes, campaign.out)
        return config.EXIT_OK

    def run(self) -> int:
        """Dispatch the command; library errors become exit codes."""
        commands = {"demo": self.cmd_demo, "refine": self.cmd_refine,
                    "compare": self.cmd_compare, "dataset": self.cmd_dataset}
        try:
            return commands[self.args.command]()
        except DemoSafetyError as e:
            print(f"❌ ERROR: {e}")
            print("   The demonstration itself is unsafe: check press depth, contact and force limit")
            return config.EXIT_CONFIG_ERROR
        except SimFault as e:
            print(f"❌ SIMULATION FAULT: {e}")
            return config.EXIT_SIM_FAULT
        except (AccelerationError, OSError) as e:
            print(f"❌ ERROR: {type(e).__name__}: {e}")
            return config.EXIT_CONFIG_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py", description="Refine time-accelerated contact-rich demonstrations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
        if scenario:
            p.add_argument("--task", default="flat_erase", help=f"one of {', '.join(TASK_KINDS)}")
            p.add_argument("--config", help="scenario YAML (task + plant sections)")
            p.add_argument("--force-limit", type=float, default=None, help="protective stop threshold (N)")

    demo = sub.add_parser("demo", help="synthesize a 1x demonstration pair")
    common(demo)

    refine = sub.add_parser("refine", help="run a playback / irlc / i2rlc campaign")
    common(refine)
    refine.add_argument("--demo", required=True, help="directory written by the demo command")
    refine.add_argument("--mode", choices=MODES, default="i2rlc")
    refine.add_argument("--speed", type=int, nargs="+", help="speed(s) for playback/irlc")
    refine.add_argument("--max-speed", type=int, default=config.MAX_SPEED)
    refine.add_argument("--iters", type=int, default=config.ITERATIONS_PER_SPEED)
    refine.add_argument("--gain", type=float, default=config.LEARNING_GAIN)
    refine.add_argument("--strict-iterations", action="store_true",
                        help="irlc runs --iters iterations instead of iters·(n-1)")
    refine.add_argument("--continue-after-stop", action="store_true",
                        help="i2rlc continues from the last safe reference after a stop")
    refine.add_argument("--workers", type=int, default=1)
    refine.add_argument("--emit", type=_emit_list, default=config.EMIT_CHOICES)

    compare = sub.add_parser("compare", help="method x speed grids and plots")
    common(compare, scenario=False)
    compare.add_argument("results", nargs="+", help="directories written by refine")
    compare.add_argument("--emit", type=_emit_list, default=config.EMIT_CHOICES)

    dataset = sub.add_parser("dataset", help="noise-augmented rollouts of a refined reference")
    common(dataset)
    dataset.add_argument("--reference", required=True, help="refined reference trajectory file")
    dataset.add_argument("--demo", help="demo directory whose scenario file to use")
    dataset.add_argument("--rollouts", type=int, default=config.DATASET_ROLLOUTS)
    dataset.add_argument("--sigma-pos", type=float, default=config.NOISE_SIGMA_POS)
    dataset.add_argument("--sigma-rot", type=float, default=config.NOISE_SIGMA_ROT)
    dataset.add_argument("--workers", type=int, default=1)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    try:
        pipeline = AccelerationPipeline(args)
        return pipeline.run()
    except KeyboardInterrupt:
        print("\n\n⊘ Interrupted by user")
        return 1


if __name__ == "__main__":
    sys.exit(main())
