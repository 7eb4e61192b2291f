"""
Dataset Module
Noise-augmented rollouts of a refined reference for downstream imitation
learning. Every rollout plays a Gaussian-perturbed copy of the reference; the
measured poses and wrenches form the observation file, the perturbed
reference the action file.
"""

from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

import config
from errors import LengthMismatch
from geometry import compose, inverse, pose_log
from plant import PlantContext, StopEvent
from saver import ResultsSaver
from trajectory import Trajectory, add_pose_noise


@dataclass(frozen=True, eq=False)
class Episode:
    index: int
    seed: int
    action: Trajectory                    # perturbed reference
    observation: Optional[Trajectory]     # measured poses + wrenches
    stop: Optional[StopEvent]

    @property
    def valid(self) -> bool:
        return self.stop is None and self.observation is not None

    @property
    def stem(self) -> str:
        return f"episode_{self.index:03d}"


def episode_seeds(seed: int, rollouts: int) -> List[int]:
    """Independent per-episode seeds derived from one base seed."""
    children = np.random.SeedSequence(seed).spawn(rollouts)
    return [int(child.generate_state(1)[0]) for child in children]


def _rollout(job) -> Episode:
    index, episode_seed, reference, context, sigma_pos, sigma_rot = job
    action = add_pose_noise(reference, sigma_pos, sigma_rot, episode_seed)
    action = action.with_label(f"action:{index:03d}")
    observation, stop = context.playback(action, context.initial_state(reference.poses[0]))
    if observation is not None:
        observation = observation.with_label(f"observation:{index:03d}")
    return Episode(index, episode_seed, action, observation, stop)


def run_rollouts(reference: Trajectory, context: PlantContext, rollouts: int = config.DATASET_ROLLOUTS,
                 sigma_pos: float = config.NOISE_SIGMA_POS, sigma_rot: float = config.NOISE_SIGMA_ROT,
                 seed: int = config.DEFAULT_SEED, workers: int = 1) -> List[Episode]:
    """Execute the perturbed playbacks; results are in episode order."""
    jobs = [(k, s, reference, context, sigma_pos, sigma_rot)
            for k, s in enumerate(episode_seeds(seed, rollouts))]
    if workers > 1 and len(jobs) > 1:
        with Pool(processes=workers) as pool:
            return pool.map(_rollout, jobs)
    return [_rollout(job) for job in jobs]


def build_rollout_dataset(reference: Trajectory, context: PlantContext,
                          rollouts: int = config.DATASET_ROLLOUTS,
                          sigma_pos: float = config.NOISE_SIGMA_POS,
                          sigma_rot: float = config.NOISE_SIGMA_ROT,
                          seed: int = config.DEFAULT_SEED, out_dir="dataset",
                          workers: int = 1, echo: Optional[dict] = None,
                          verbose: bool = False) -> List[Episode]:
    """
    Build and save a rollout dataset.

    Episodes that trip the safety monitor are flagged in the manifest and get
    no files; the manifest's episode count covers valid episodes only.

    Args:
        reference (Trajectory): Refined reference to perturb
        context (PlantContext): Plant to execute on
        rollouts (int): Number of perturbed playbacks (0 gives an empty dataset)
        sigma_pos (float): Translational tangent noise std (m)
        sigma_rot (float): Rotational tangent noise std (rad)
        seed (int): Base seed
        out_dir (str | Path): Output directory
        workers (int): Worker processes
        echo (dict): Extra config to echo into the manifest

    Returns:
        list: Every Episode, valid or not
    """
    if verbose:
        print(f"\n🎲 Rolling out {rollouts} perturbed playback(s) "
              f"(sigma_pos={sigma_pos} m, sigma_rot={sigma_rot} rad)")
    episodes = run_rollouts(reference, context, rollouts, sigma_pos, sigma_rot, seed, workers)

    saver = ResultsSaver(out_dir, verbose=verbose)
    entries, flagged = [], []
    for episode in episodes:
        if not episode.valid:
            flagged.append({"index": episode.index, "seed": episode.seed,
                            "stop": episode.stop.to_dict() if episode.stop is not None else None})
            if verbose:
                print(f"  ⚠ {episode.stem}: excluded ({episode.stop.message if episode.stop else 'too short'})")
            continue
        entries.append({
            "index": episode.index,
            "seed": episode.seed,
            "observation": saver.save_trajectory(episode.observation, f"{episode.stem}_obs.csv"),
            "action": saver.save_trajectory(episode.action, f"{episode.stem}_action.csv"),
        })

    settings = {"rollouts": rollouts, "sigma_pos": sigma_pos, "sigma_rot": sigma_rot,
                "reference_label": reference.label, "reference_samples": len(reference)}
    settings.update(context.to_sections())
    if echo:
        settings.update(echo)
    saver.write_manifest("dataset", settings, seed,
                         extra={"episode_count": len(entries), "episodes": entries, "flagged": flagged})
    if verbose:
        print(f"✓ {len(entries)} episode(s) written to {Path(out_dir)}")
    return episodes


def noise_statistics(reference: Trajectory, noisy_refs: Sequence[Trajectory], coupled: bool = True) -> dict:
    """
    Standard deviation of the tangent perturbations between a reference and
    its noisy copies, pooled over every sample of every copy.

    Returns:
        dict: per_axis (6 stds, v then w), sigma_pos and sigma_rot (axis means), samples
    """
    twists = []
    for noisy in noisy_refs:
        if len(noisy) != len(reference):
            raise LengthMismatch(f"noisy copy has {len(noisy)} samples, reference {len(reference)}")
        for base, perturbed in zip(reference.poses, noisy.poses):
            twists.append(pose_log(compose(inverse(base), perturbed), coupled=coupled).as_vector())

    if not twists:
        return {"per_axis": [0.0] * 6, "sigma_pos": 0.0, "sigma_rot": 0.0, "samples": 0}
    stds = np.std(np.array(twists), axis=0)
    return {
        "per_axis": stds.tolist(),
        "sigma_pos": float(np.mean(stds[:3])),
        "sigma_rot": float(np.mean(stds[3:])),
        "samples": len(twists),
    }
