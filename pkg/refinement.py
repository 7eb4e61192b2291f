"""
Refinement Module
Reference refinement of accelerated demonstrations:
- irlc_update: tangent-space reference correction from one playback
- run_irlc: fixed-speed refinement starting from the downsampled demo
- run_i2rlc: speed increased one step per stage, each stage warm-started from
  the previous stage's refined reference
- run_playback_baseline: naive downsampled playback, no updates
- run_comparison: the three methods over a list of speeds (optionally in parallel)
"""

from dataclasses import asdict, dataclass
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import config
from errors import ConfigError, LengthMismatch, RotationNearPi
from geometry import compose, inverse, pose_exp, pose_log, scale_twist
from metrics import rms_contact_force, trajectory_dtw
from plant import PlantContext, StopEvent
from trajectory import Trajectory, downsample, subsample_uniform


MODES = ("playback", "irlc", "i2rlc")
MODE_ALIASES = {"playback_only": "playback"}

Demo = Tuple[Trajectory, Trajectory]      # (demo_measured, demo_ref)


@dataclass(frozen=True)
class RefinementConfig:
    """
    Refinement campaign settings.

    Attributes:
        mode (str): playback, irlc or i2rlc
        max_speed (int): Highest speedup N (i2rlc stages run 2..N)
        iterations_per_speed (int): I
        learning_gain (float): l in (0, 1]
        irlc_target_speed (int): Speed of an irlc/playback run (defaults to max_speed)
        strict_iterations (bool): irlc runs I iterations instead of I·(n-1)
        continue_after_stop (bool): i2rlc keeps going from the last safe reference
        compose_left (bool): apply the correction in the spatial frame
        coupled (bool): SE(3) maps (False: SO(3) x R^3)
    """

    mode: str = "i2rlc"
    max_speed: int = config.MAX_SPEED
    iterations_per_speed: int = config.ITERATIONS_PER_SPEED
    learning_gain: float = config.LEARNING_GAIN
    irlc_target_speed: Optional[int] = None
    strict_iterations: bool = False
    continue_after_stop: bool = False
    compose_left: bool = False
    coupled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", MODE_ALIASES.get(self.mode, self.mode))
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got '{self.mode}'")
        if self.max_speed < 2:
            raise ConfigError(f"max_speed must be >= 2, got {self.max_speed}")
        if self.iterations_per_speed < 1:
            raise ConfigError(f"iterations_per_speed must be >= 1, got {self.iterations_per_speed}")
        _check_gain(self.learning_gain)
        if self.irlc_target_speed is not None and self.irlc_target_speed < 1:
            raise ConfigError(f"irlc_target_speed must be >= 1, got {self.irlc_target_speed}")

    @property
    def target_speed(self) -> int:
        return self.irlc_target_speed if self.irlc_target_speed is not None else self.max_speed

    def irlc_iterations(self, n: int) -> int:
        """Iterations of a fixed-speed run matching the I2RLC total up to speed n."""
        if self.strict_iterations:
            return self.iterations_per_speed
        return self.iterations_per_speed * max(n - 1, 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RefinementConfig":
        known = {name: data[name] for name in cls.__dataclass_fields__ if name in data}
        return cls(**known)


def _check_gain(l: float):
    if not 0.0 < l <= 1.0:
        raise ConfigError(f"learning gain must be in (0, 1], got {l}")


# ===== run records =====

@dataclass(frozen=True, eq=False)
class IterationRecord:
    """One playback (and the metrics of what it measured)."""

    iteration: int                         # 1-based over the whole run
    speed: int
    stage_iteration: int                   # 1-based within the stage
    reference: Trajectory
    measured: Optional[Trajectory]
    dtw: Optional[float]
    dtw_cost: Optional[float]
    rms_force: Optional[float]
    stop: Optional[StopEvent] = None
    peak_force: Optional[float] = None     # largest control-step force of the playback

    def with_stop(self, stop: StopEvent) -> "IterationRecord":
        return IterationRecord(self.iteration, self.speed, self.stage_iteration, self.reference,
                               self.measured, self.dtw, self.dtw_cost, self.rms_force, stop,
                               self.peak_force)

    def to_row(self) -> dict:
        return {
            "iteration": self.iteration,
            "speed": self.speed,
            "stage_iteration": self.stage_iteration,
            "dtw": self.dtw,
            "dtw_cost": self.dtw_cost,
            "rms_force": self.rms_force,
            "peak_force": self.peak_force,
            "stop": self.stop.to_dict() if self.stop is not None else None,
        }


@dataclass(frozen=True, eq=False)
class StageRecord:
    """All iterations executed at one speed."""

    speed: int
    target: Trajectory                     # downsampled demo measurement
    records: Tuple[IterationRecord, ...]
    final_reference: Trajectory            # last reference played without a stop

    @property
    def stopped(self) -> bool:
        return any(r.stop is not None for r in self.records)

    @property
    def final_record(self) -> Optional[IterationRecord]:
        """Last record without a stop (the last record if every one stopped)."""
        for record in reversed(self.records):
            if record.stop is None:
                return record
        return self.records[-1] if self.records else None


@dataclass(frozen=True, eq=False)
class RefinementRun:
    """Ordered stages of one refinement campaign (truncated runs keep their stop)."""

    mode: str
    config: RefinementConfig
    stages: Tuple[StageRecord, ...]
    label: str = ""

    @property
    def records(self) -> List[IterationRecord]:
        return [record for stage in self.stages for record in stage.records]

    @property
    def playback_count(self) -> int:
        return len(self.records)

    @property
    def speeds(self) -> List[int]:
        return [stage.speed for stage in self.stages]

    @property
    def final_references(self) -> Dict[int, Trajectory]:
        return {stage.speed: stage.final_reference for stage in self.stages}

    @property
    def first_stop(self) -> Optional[StopEvent]:
        for record in self.records:
            if record.stop is not None:
                return record.stop
        return None

    @property
    def stopped(self) -> bool:
        return self.first_stop is not None

    @property
    def stop_kind(self) -> Optional[str]:
        stop = self.first_stop
        return stop.kind if stop is not None else None


# ===== update rule =====

def irlc_update(prev_ref: Trajectory, measured: Trajectory, target: Trajectory, l: float,
                compose_left: bool = False, coupled: bool = True) -> Trajectory:
    """
    new_ref[t] = prev_ref[t] · exp(l · log(measured[t]⁻¹ · target[t]))

    With compose_left the spatial error target[t] · measured[t]⁻¹ is applied on
    the left instead. Alignment is index-wise.

    Args:
        prev_ref (Trajectory): Reference that was played
        measured (Trajectory): What the plant did
        target (Trajectory): Downsampled demo measurement
        l (float): Learning gain in (0, 1]

    Returns:
        Trajectory: Updated reference without a wrench channel

    Raises:
        LengthMismatch: the three trajectories differ in length
        RotationNearPi: error rotation at the cut locus, with the sample index
    """
    if not len(prev_ref) == len(measured) == len(target):
        raise LengthMismatch(
            f"reference {len(prev_ref)}, measured {len(measured)} and target {len(target)} samples differ"
        )
    _check_gain(l)

    poses = []
    for t, (ref, meas, goal) in enumerate(zip(prev_ref.poses, measured.poses, target.poses)):
        error = compose(goal, inverse(meas)) if compose_left else compose(inverse(meas), goal)
        try:
            delta = pose_log(error, coupled=coupled)
        except RotationNearPi as e:
            raise e.at_index(t) from e
        correction = pose_exp(scale_twist(delta, l), coupled=coupled)
        poses.append(compose(correction, ref) if compose_left else compose(ref, correction))

    return Trajectory(tuple(poses), None, prev_ref.rate_hz, prev_ref.label)


# ===== campaigns =====

def _measure(measured: Optional[Trajectory], target: Trajectory):
    if measured is None:
        return None, None, None
    alignment = trajectory_dtw(measured, target)
    return alignment.distance, alignment.cost, rms_contact_force(measured)


def _run_stage(start_ref: Trajectory, target: Trajectory, speed: int, iterations: int,
               first_iteration: int, cfg: RefinementConfig, context: PlantContext,
               demo_start, verbose: bool) -> StageRecord:
    """
    Play/update loop at one speed: iteration 1 plays start_ref, every later
    iteration plays the update of the previous one. No update follows the
    last playback.
    """
    reference = start_ref
    safe_reference = start_ref
    records = []
    monitor = context.monitor()

    for i in range(1, iterations + 1):
        measured, stop = context.playback(reference, context.initial_state(demo_start), monitor)
        dtw, cost, rms = _measure(measured, target)
        record = IterationRecord(first_iteration + i - 1, speed, i, reference, measured,
                                 dtw, cost, rms, stop, monitor.peak)

        if stop is not None:
            records.append(record)
            if verbose:
                print(f"  ⚠ {speed}x iteration {i}/{iterations}: {stop.kind} at sample "
                      f"{stop.sample_index} ({stop.message})")
            break

        safe_reference = reference
        if verbose:
            print(f"  ✓ {speed}x iteration {i}/{iterations}: DTW {dtw * 1000:.3f} mm, "
                  f"RMS force {rms:.2f} N")

        if i < iterations:
            try:
                reference = irlc_update(reference, measured, target, cfg.learning_gain,
                                        compose_left=cfg.compose_left, coupled=cfg.coupled)
            except RotationNearPi as e:
                steps = context.steps_per_sample(target.rate_hz)
                force = measured.wrenches[e.index].force_norm()
                record = record.with_stop(
                    StopEvent("fault", e.index, (e.index + 1) * steps, force, str(e))
                )
                if verbose:
                    print(f"  ❌ {speed}x iteration {i}: update diverged ({e})")
                records.append(record)
                break
        records.append(record)

    return StageRecord(speed, target, tuple(records), safe_reference)


def _targets(demo: Demo, n: int) -> Tuple[Trajectory, Trajectory]:
    demo_measured, demo_ref = demo
    if len(demo_measured) != len(demo_ref):
        raise LengthMismatch(
            f"demo measurement ({len(demo_measured)}) and reference ({len(demo_ref)}) differ in length"
        )
    return downsample(demo_measured, n), downsample(demo_ref, n)


def run_irlc(demo: Demo, n: int, cfg: Optional[RefinementConfig] = None,
             context: Optional[PlantContext] = None, verbose: bool = False) -> RefinementRun:
    """
    Fixed-speed refinement.

    Iteration 1 plays the downsampled demo reference; every later iteration
    plays its update against the downsampled demo measurement. The iteration
    count is I·(n-1) (or I with strict_iterations). A stop ends the run with
    the stop recorded on the last iteration.

    Args:
        demo (tuple): (demo_measured, demo_ref)
        n (int): Speedup
        cfg (RefinementConfig): Gains and counts
        context (PlantContext): Plant to play on
        verbose (bool): Print one status line per iteration

    Returns:
        RefinementRun: A single stage at speed n
    """
    cfg = cfg or RefinementConfig(mode="irlc")
    context = context or PlantContext()
    if n < 1:
        raise ConfigError(f"speed must be >= 1, got {n}")

    target, start = _targets(demo, n)
    iterations = cfg.irlc_iterations(n)
    if verbose:
        print(f"\n🔁 IRLC at {n}x: {iterations} iterations, gain {cfg.learning_gain}")

    stage = _run_stage(start, target, n, iterations, 1, cfg, context, demo[1].poses[0], verbose)
    return RefinementRun("irlc", cfg, (stage,), f"irlc@{n}x")


def run_i2rlc(demo: Demo, cfg: Optional[RefinementConfig] = None,
              context: Optional[PlantContext] = None, verbose: bool = False) -> RefinementRun:
    """
    Incremental-speed refinement over stages n = 2..N with I iterations each.

    Stage 2 starts from the downsampled demo reference; stage n > 2 starts from
    the previous stage's refined reference uniformly subsampled to the stage
    length. After a stop the campaign ends, unless continue_after_stop is set,
    in which case the next stage warm-starts from the last safe reference.
    """
    cfg = cfg or RefinementConfig(mode="i2rlc")
    context = context or PlantContext()
    pairs = {n: _targets(demo, n) for n in range(2, cfg.max_speed + 1)}
    if verbose:
        print(f"\n🔁 I2RLC 2x..{cfg.max_speed}x: {cfg.iterations_per_speed} iterations per speed, "
              f"gain {cfg.learning_gain}")

    stages = []
    iteration = 1
    previous = None
    for n, (target, downsampled_ref) in pairs.items():
        if previous is None:
            start = downsampled_ref
        else:
            start = subsample_uniform(previous, len(downsampled_ref), coupled=cfg.coupled)

        stage = _run_stage(start, target, n, cfg.iterations_per_speed, iteration, cfg,
                           context, demo[1].poses[0], verbose)
        stages.append(stage)
        iteration += len(stage.records)
        previous = stage.final_reference

        if stage.stopped and not cfg.continue_after_stop:
            break

    return RefinementRun("i2rlc", cfg, tuple(stages), f"i2rlc@2-{cfg.max_speed}x")


def run_playback_baseline(demo: Demo, n: int, context: Optional[PlantContext] = None,
                          cfg: Optional[RefinementConfig] = None, verbose: bool = False) -> RefinementRun:
    """Single playback of the downsampled demo reference."""
    cfg = cfg or RefinementConfig(mode="playback")
    context = context or PlantContext()
    if n < 1:
        raise ConfigError(f"speed must be >= 1, got {n}")

    target, start = _targets(demo, n)
    stage = _run_stage(start, target, n, 1, 1, cfg, context, demo[1].poses[0], verbose)
    return RefinementRun("playback", cfg, (stage,), f"playback@{n}x")


def run_refinement(demo: Demo, cfg: RefinementConfig, context: PlantContext,
                   speed: Optional[int] = None, verbose: bool = False) -> RefinementRun:
    """Dispatch on cfg.mode; speed overrides cfg.target_speed for irlc/playback."""
    n = speed if speed is not None else cfg.target_speed
    if cfg.mode == "i2rlc":
        return run_i2rlc(demo, cfg, context, verbose)
    if cfg.mode == "irlc":
        return run_irlc(demo, n, cfg, context, verbose)
    return run_playback_baseline(demo, n, context, cfg, verbose)


def _run_job(job) -> RefinementRun:
    demo, mode, speed, cfg, context, verbose = job
    return run_refinement(demo, RefinementConfig.from_dict({**cfg.to_dict(), "mode": mode}),
                          context, speed, verbose)


def run_comparison(demo: Demo, speeds: Sequence[int], cfg: Optional[RefinementConfig] = None,
                   context: Optional[PlantContext] = None, workers: int = 1,
                   methods: Sequence[str] = MODES, verbose: bool = False) -> Dict[str, List[RefinementRun]]:
    """
    Every requested method over a list of speeds.

    Playback and IRLC run once per speed; I2RLC runs once up to max(speeds).
    Runs are independent, so workers > 1 spreads them over processes. The
    result is ordered by method then speed regardless of completion order.

    Returns:
        dict: method -> list of RefinementRun
    """
    cfg = cfg or RefinementConfig()
    context = context or PlantContext()
    speeds = sorted(set(int(s) for s in speeds))
    if not speeds:
        raise ConfigError("no speeds requested")

    jobs = []
    for method in methods:
        method = MODE_ALIASES.get(method, method)
        if method == "i2rlc":
            top = max(speeds)
            if top < 2:
                raise ConfigError("i2rlc needs a speed >= 2")
            job_cfg = RefinementConfig.from_dict({**cfg.to_dict(), "max_speed": top})
            jobs.append((method, top, job_cfg))
        else:
            jobs.extend((method, speed, cfg) for speed in speeds)

    payload = [(demo, method, speed, job_cfg, context, verbose) for method, speed, job_cfg in jobs]
    if workers > 1:
        with Pool(processes=workers) as pool:
            runs = pool.map(_run_job, payload)
    else:
        runs = [_run_job(job) for job in payload]

    grouped: Dict[str, List[RefinementRun]] = {}
    for (method, _, _), run in zip(jobs, runs):
        grouped.setdefault(method, []).append(run)
    return grouped
