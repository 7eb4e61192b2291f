"""
Scenarios Module
The three contact-rich tasks as parameterized world setups, and the scripted
"human demonstration" generator that stands in for teleoperation.

Default dimensions:
    flat_erase    whiteboard plane z = 0, 90° arc of radius 0.10 m, 20 s demo
    curved_erase  convex cylinder of radius 0.15 m (axis along y, top at z = 0)
    peg_in_hole   peg radius 9 mm, hole radius 10 mm, depth 30 mm, 1 mm chamfer
"""

from dataclasses import dataclass
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import butter, filtfilt
from scipy.signal.windows import tukey

import config
from errors import DemoSafetyError, SchemaError
from geometry import Pose
from plant import ContactModel, ControllerParams, Cylinder, Hole, Plane, PlantContext
from trajectory import Trajectory


TASK_KINDS = ("flat_erase", "curved_erase", "peg_in_hole")
ERASE_PHASES = (0.15, 0.70, 0.15)        # approach, arc, lift
PEG_PHASES = (0.45, 0.40, 0.15)          # transfer, descend, dwell


def min_jerk(tau):
    """Minimum-jerk time scaling on [0, 1]."""
    tau = np.clip(tau, 0.0, 1.0)
    return tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau ** 2)


@dataclass(frozen=True)
class ArcPath:
    """Arc in the xy-plane, projected onto the task surface."""

    center: Tuple[float, float]
    radius: float
    start_angle: float
    end_angle: float

    def point(self, fraction: float) -> Tuple[float, float]:
        angle = self.start_angle + (self.end_angle - self.start_angle) * fraction
        return (self.center[0] + self.radius * math.cos(angle),
                self.center[1] + self.radius * math.sin(angle))

    def to_dict(self) -> dict:
        return {"type": "arc", "center": list(self.center), "radius": self.radius,
                "start_angle": self.start_angle, "end_angle": self.end_angle}


@dataclass(frozen=True)
class PegPath:
    """Approach and insertion waypoints of the peg tip."""

    start: Tuple[float, float, float]
    above: Tuple[float, float, float]
    insertion: Tuple[float, float, float]

    def to_dict(self) -> dict:
        return {"type": "peg", "start": list(self.start), "above": list(self.above),
                "insertion": list(self.insertion)}


@dataclass(frozen=True, eq=False)
class TaskSpec:
    """
    One task setup.

    Attributes:
        kind (str): flat_erase, curved_erase or peg_in_hole
        contact (ContactModel): Environment
        path (ArcPath | PegPath): Nominal path
        demo_duration_s (float): Length of the 1x demonstration
        press_depth (float): Commanded reference depth below the surface (erasing)
        hover_height (float): Clearance above the surface before/after erasing
        jitter_amplitude (float): RMS of the band-limited demo jitter (m)
        jitter_cutoff_hz (float): Jitter bandwidth
    """

    kind: str
    contact: ContactModel
    path: object
    demo_duration_s: float
    press_depth: float = 0.0
    hover_height: float = config.HOVER_HEIGHT
    jitter_amplitude: float = config.JITTER_AMPLITUDE
    jitter_cutoff_hz: float = config.JITTER_CUTOFF_HZ

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise SchemaError("kind", f"unknown task kind '{self.kind}' (expected one of {', '.join(TASK_KINDS)})")
        if not self.demo_duration_s > 0:
            raise SchemaError("demo_duration_s", "demo_duration_s must be positive")
        if self.jitter_amplitude < 0:
            raise SchemaError("jitter_amplitude", "jitter_amplitude must be non-negative")

        if self.kind == "peg_in_hole":
            self._check_peg()
        else:
            if not isinstance(self.path, ArcPath) or not self.path.radius > 0:
                raise SchemaError("path", "erasing tasks need an arc with positive radius")
            expected = Plane if self.kind == "flat_erase" else Cylinder
            if not isinstance(self.contact.geometry, expected):
                raise SchemaError("contact", f"{self.kind} needs a {expected.__name__.lower()} geometry")

    def _check_peg(self):
        hole = self.contact.geometry
        if not isinstance(hole, Hole) or not isinstance(self.path, PegPath):
            raise SchemaError("path", "peg_in_hole needs a hole geometry and a peg path")
        depth_in = -float((np.asarray(self.path.insertion) - hole.center) @ hole.axis)
        if not 0 < depth_in < hole.depth:
            raise SchemaError("path", f"insertion depth {depth_in:.4f} m is not inside the hole")

    @property
    def num_samples(self) -> int:
        return int(round(self.demo_duration_s * config.RECORD_RATE_HZ))


def default_tasks() -> List[TaskSpec]:
    """The three canonical tasks with the documented default dimensions."""
    arc = ArcPath((0.0, 0.0), config.ARC_RADIUS, 0.0, math.pi / 2.0)

    flat = TaskSpec(
        kind="flat_erase",
        contact=ContactModel(Plane((0.0, 0.0, 0.0), (0.0, 0.0, 1.0)), mu=config.FRICTION_ERASE),
        path=arc,
        demo_duration_s=config.DEMO_DURATION_S,
        press_depth=config.PRESS_DEPTH,
    )
    curved = TaskSpec(
        kind="curved_erase",
        contact=ContactModel(
            Cylinder((0.0, 0.0, -config.CYLINDER_RADIUS), (0.0, 1.0, 0.0), config.CYLINDER_RADIUS),
            mu=config.FRICTION_ERASE,
        ),
        path=ArcPath((0.0, 0.0), config.ARC_RADIUS, -math.pi / 4.0, math.pi / 4.0),
        demo_duration_s=config.DEMO_DURATION_S,
        press_depth=config.PRESS_DEPTH,
    )
    peg = TaskSpec(
        kind="peg_in_hole",
        contact=ContactModel(
            Hole((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), config.HOLE_RADIUS, config.PEG_RADIUS,
                 config.HOLE_DEPTH, config.HOLE_CHAMFER),
            mu=config.FRICTION_PEG,
        ),
        path=PegPath((0.04, 0.0, 0.03), (0.0, 0.0, 0.01), (0.0, 0.0, -config.INSERTION_DEPTH)),
        demo_duration_s=config.PEG_DEMO_DURATION_S,
        jitter_amplitude=0.0002,
    )
    return [flat, curved, peg]


def task_by_kind(kind: str) -> TaskSpec:
    for task in default_tasks():
        if task.kind == kind:
            return task
    raise SchemaError("kind", f"unknown task kind '{kind}' (expected one of {', '.join(TASK_KINDS)})")


# ===== demonstration synthesis =====

def _jitter(task: TaskSpec, count: int, seed: int) -> np.ndarray:
    """Seeded band-limited lateral (x, y) jitter, tapered to zero at both ends."""
    if task.jitter_amplitude == 0:
        return np.zeros((count, 2))

    rng = np.random.default_rng(seed)
    noise = rng.normal(size=(count, 2))
    b, a = butter(4, task.jitter_cutoff_hz / (config.RECORD_RATE_HZ / 2.0))
    smooth = filtfilt(b, a, noise, axis=0)
    smooth *= task.jitter_amplitude / np.sqrt(np.mean(smooth ** 2))
    return smooth * tukey(count, alpha=0.2)[:, None]


def _surface(task: TaskSpec, x: float, y: float) -> Tuple[np.ndarray, np.ndarray]:
    geometry = task.contact.geometry
    if isinstance(geometry, Cylinder):
        return geometry.surface_point(x, y)
    n = geometry.normal
    z = geometry.point[2] - ((x - geometry.point[0]) * n[0] + (y - geometry.point[1]) * n[1]) / n[2]
    return np.array([x, y, z]), n


def _erase_poses(task: TaskSpec, tau: np.ndarray, jitter: np.ndarray) -> List[Pose]:
    approach, arc, _ = ERASE_PHASES
    poses = []
    for k, t in enumerate(tau):
        if t < approach:
            s = float(min_jerk(t / approach))
            fraction, height = 0.0, task.hover_height + (-task.press_depth - task.hover_height) * s
        elif t <= approach + arc:
            fraction, height = float(min_jerk((t - approach) / arc)), -task.press_depth
        else:
            s = float(min_jerk((t - approach - arc) / (1.0 - approach - arc)))
            fraction, height = 1.0, -task.press_depth + (task.hover_height + task.press_depth) * s

        x, y = task.path.point(fraction)
        point, normal = _surface(task, x + jitter[k, 0], y + jitter[k, 1])
        tilt = math.atan2(normal[0], normal[2])
        poses.append(Pose.from_rotvec((0.0, tilt, 0.0), point + height * normal))
    return poses


def _peg_poses(task: TaskSpec, tau: np.ndarray, jitter: np.ndarray) -> List[Pose]:
    transfer, descend, _ = PEG_PHASES
    start, above, insertion = (np.asarray(p, dtype=float) for p in
                               (task.path.start, task.path.above, task.path.insertion))
    poses = []
    for k, t in enumerate(tau):
        if t < transfer:
            position = start + (above - start) * float(min_jerk(t / transfer))
        elif t < transfer + descend:
            position = above + (insertion - above) * float(min_jerk((t - transfer) / descend))
        else:
            position = insertion
        poses.append(Pose.from_translation(position + np.array([jitter[k, 0], jitter[k, 1], 0.0])))
    return poses


def nominal_reference(task: TaskSpec, seed: int = config.DEFAULT_SEED) -> Trajectory:
    """
    Slow (1x) reference along the task path with a minimum-jerk time profile
    plus seeded band-limited jitter, sampled at the record rate.
    """
    count = task.num_samples
    tau = np.arange(count) / (count - 1)
    jitter = _jitter(task, count, seed)

    if task.kind == "peg_in_hole":
        poses = _peg_poses(task, tau, jitter)
    else:
        poses = _erase_poses(task, tau, jitter)
    return Trajectory(tuple(poses), None, config.RECORD_RATE_HZ, f"{task.kind}:demo_ref")


def build_context(task: TaskSpec, params: Optional[ControllerParams] = None, **options) -> PlantContext:
    """Plant context for a task; options are PlantContext fields (force_limit, ...)."""
    return PlantContext(params=params or ControllerParams(), contact=task.contact, **options)


def generate_demo(task: TaskSpec, params: Optional[ControllerParams] = None,
                  seed: int = config.DEFAULT_SEED, context: Optional[PlantContext] = None):
    """
    Synthesize a 1x demonstration pair.

    Args:
        task (TaskSpec): Task setup
        params (ControllerParams): Controller (ignored when context is given)
        seed (int): Jitter seed
        context (PlantContext): Plant to execute the demonstration on

    Returns:
        tuple: (demo_measured, demo_ref), both at the record rate

    Raises:
        DemoSafetyError: the demonstration itself tripped the safety monitor
    """
    context = context or build_context(task, params)
    demo_ref = nominal_reference(task, seed)
    measured, stop = context.playback(demo_ref)
    if stop is not None:
        raise DemoSafetyError(stop)
    return measured.with_label(f"{task.kind}:demo_measured"), demo_ref


# ===== scenario file mapping =====

TASK_KEYS = ("kind", "demo_duration_s", "press_depth", "hover_height",
             "jitter_amplitude", "jitter_cutoff_hz", "path")
PATH_KEYS = {"arc": ("center", "radius", "start_angle", "end_angle"),
             "peg": ("start", "above", "insertion")}

def task_to_dict(task: TaskSpec) -> dict:
    return {
        "kind": task.kind,
        "demo_duration_s": float(task.demo_duration_s),
        "press_depth": float(task.press_depth),
        "hover_height": float(task.hover_height),
        "jitter_amplitude": float(task.jitter_amplitude),
        "jitter_cutoff_hz": float(task.jitter_cutoff_hz),
        "path": task.path.to_dict(),
    }


def task_from_dict(data: dict, contact: Optional[ContactModel]) -> TaskSpec:
    if "kind" not in data:
        raise SchemaError("kind", "task section is missing 'kind'")
    if data["kind"] not in TASK_KINDS:
        raise SchemaError("kind", f"unknown task kind '{data['kind']}' (expected one of {', '.join(TASK_KINDS)})")
    if contact is None:
        raise SchemaError("contact", "task scenarios need a contact section")
    if "path" not in data:
        raise SchemaError("path", "task section is missing 'path'")

    config.check_keys(data, TASK_KEYS, "task")

    path = dict(data["path"])
    kind = path.pop("type", None)
    if kind not in PATH_KEYS:
        raise SchemaError("path", f"unknown path type '{kind}'")
    config.check_keys(path, PATH_KEYS[kind], f"task.path ({kind})")
    for key in PATH_KEYS[kind]:
        if key not in path:
            raise SchemaError(f"task.path.{key}", f"{kind} path is missing '{key}'")
    if kind == "arc":
        path_obj = ArcPath(tuple(path["center"]), float(path["radius"]),
                           float(path["start_angle"]), float(path["end_angle"]))
    else:
        path_obj = PegPath(tuple(path["start"]), tuple(path["above"]), tuple(path["insertion"]))

    return TaskSpec(
        kind=data["kind"],
        contact=contact,
        path=path_obj,
        demo_duration_s=float(data.get("demo_duration_s", config.DEMO_DURATION_S)),
        press_depth=float(data.get("press_depth", 0.0)),
        hover_height=float(data.get("hover_height", config.HOVER_HEIGHT)),
        jitter_amplitude=float(data.get("jitter_amplitude", config.JITTER_AMPLITUDE)),
        jitter_cutoff_hz=float(data.get("jitter_cutoff_hz", config.JITTER_CUTOFF_HZ)),
    )


def save_scenario(task: TaskSpec, context: PlantContext, path):
    """Write task + plant context as one versioned config file."""
    data = {"task": task_to_dict(task)}
    data.update(context.to_sections())
    return config.save_config_file(data, path)


def load_scenario(path) -> Tuple[TaskSpec, PlantContext]:
    """Read a scenario file into (TaskSpec, PlantContext)."""
    data = config.load_config_file(path)
    context = PlantContext.from_sections(data)
    return task_from_dict(data["task"] or {}, context.contact), context
