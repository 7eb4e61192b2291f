"""
Shared pytest fixtures: small demonstrations that keep unit tests fast.
"""

from dataclasses import replace

import numpy as np
import pytest

from geometry import Pose
from plant import PlantContext
from scenarios import build_context, generate_demo, min_jerk, task_by_kind
from trajectory import Trajectory


def line_reference(samples: int = 100, length: float = 0.1, rate_hz: float = 50.0) -> Trajectory:
    """Free-space straight line along x with a minimum-jerk profile."""
    tau = np.arange(samples) / (samples - 1)
    x = length * min_jerk(tau)
    poses = tuple(Pose.from_translation((float(v), 0.0, 0.1)) for v in x)
    return Trajectory(poses, None, rate_hz, "line:demo_ref")


def free_space_demo(samples: int = 100, length: float = 0.1):
    """(demo_measured, demo_ref) of a line played through the default plant without contact."""
    demo_ref = line_reference(samples, length)
    measured, stop = PlantContext().playback(demo_ref)
    assert stop is None
    return measured.with_label("line:demo_measured"), demo_ref


@pytest.fixture(scope="session")
def line_demo():
    return free_space_demo()


@pytest.fixture(scope="session")
def short_flat_task():
    """flat_erase shortened to a 4 s demonstration."""
    return replace(task_by_kind("flat_erase"), demo_duration_s=4.0)


@pytest.fixture(scope="session")
def short_flat_demo(short_flat_task):
    context = build_context(short_flat_task)
    return generate_demo(short_flat_task, context=context), context
