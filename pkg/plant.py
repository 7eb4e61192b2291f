"""
Plant Module
Deterministic Cartesian surrogate of a forward-dynamics compliance controlled
follower: a 6-DoF virtual rigid body driven by a stiffness wrench through a PD
force loop, in penalty contact with the task geometry.

Per control step (body frame, twist ordered v then w):
    e     = log(T⁻¹ · T_ref)
    f_net = K_c ⊙ e + sign · F_ext
    f_c   = K_p ⊙ f_net + K_d ⊙ K_c ⊙ (e − e_prev) / dt
    twist += dt · f_c ⊘ M_vm                      (semi-implicit Euler)
    T     = T · exp(dt · twist)

The D term differentiates the stiffness wrench only (not F_ext). While a
reference sample is held it reduces to −K_d ⊙ K_c ⊙ twist; a new sample adds a
kick proportional to the reference step.
"""

from dataclasses import dataclass, field
import math
from typing import List, Optional, Tuple

import numpy as np

import config
from errors import ConfigError, RotationNearPi, SchemaError, SimFault
from geometry import Pose, Twist, compose, geodesic_interpolate, inverse, pose_exp, pose_log
from trajectory import Trajectory, Wrench


def _vector6(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(6)
    if not np.all(array > 0):
        raise ConfigError(f"{name} must be strictly positive, got {array.tolist()}")
    array.setflags(write=False)
    return array


def _unit(vector, name: str) -> np.ndarray:
    vector = np.asarray(vector, dtype=float).reshape(3)
    norm = np.linalg.norm(vector)
    if norm < 1e-12:
        raise ConfigError(f"{name} must be a non-zero vector")
    return vector / norm


@dataclass(frozen=True, eq=False)
class ControllerParams:
    """FDCC gains, virtual inertia and control rate."""

    k_c: np.ndarray = config.STIFFNESS
    k_p: np.ndarray = config.PD_PROPORTIONAL
    k_d: np.ndarray = config.PD_DERIVATIVE
    m_vm: np.ndarray = config.VIRTUAL_INERTIA
    control_rate_hz: float = config.CONTROL_RATE_HZ
    force_sign: float = config.FORCE_SIGN

    def __post_init__(self):
        for name in ("k_c", "k_p", "k_d", "m_vm"):
            object.__setattr__(self, name, _vector6(getattr(self, name), name))
        if not self.control_rate_hz > 0:
            raise ConfigError(f"control_rate_hz must be positive, got {self.control_rate_hz}")
        if self.force_sign not in (1.0, -1.0):
            raise ConfigError(f"force_sign must be +1 or -1, got {self.force_sign}")

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate_hz

    def to_dict(self) -> dict:
        return {
            "k_c": self.k_c.tolist(),
            "k_p": self.k_p.tolist(),
            "k_d": self.k_d.tolist(),
            "m_vm": self.m_vm.tolist(),
            "control_rate_hz": float(self.control_rate_hz),
            "force_sign": float(self.force_sign),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControllerParams":
        """Controller section of a scenario file; missing keys take the defaults."""
        config.check_keys(data, tuple(cls.__dataclass_fields__), "controller")
        return cls(
            k_c=data.get("k_c", config.STIFFNESS),
            k_p=data.get("k_p", config.PD_PROPORTIONAL),
            k_d=data.get("k_d", config.PD_DERIVATIVE),
            m_vm=data.get("m_vm", config.VIRTUAL_INERTIA),
            control_rate_hz=float(data.get("control_rate_hz", config.CONTROL_RATE_HZ)),
            force_sign=float(data.get("force_sign", config.FORCE_SIGN)),
        )


# ===== contact geometry =====
# Each geometry returns (penetration, outward unit normal) pairs for a tool point.

@dataclass(frozen=True, eq=False)
class Plane:
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(3))
        object.__setattr__(self, "normal", _unit(self.normal, "plane normal"))

    def contacts(self, p: np.ndarray) -> List[Tuple[float, np.ndarray]]:
        penetration = float((self.point - p) @ self.normal)
        return [(penetration, self.normal)] if penetration > 0 else []

    def to_dict(self) -> dict:
        return {"type": "plane", "point": self.point.tolist(), "normal": self.normal.tolist()}


@dataclass(frozen=True, eq=False)
class Cylinder:
    """Convex cylinder; the tool stays outside it."""

    axis_point: np.ndarray
    axis_dir: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "axis_point", np.asarray(self.axis_point, dtype=float).reshape(3))
        object.__setattr__(self, "axis_dir", _unit(self.axis_dir, "cylinder axis"))
        if not self.radius > 0:
            raise ConfigError(f"cylinder radius must be positive, got {self.radius}")

    def contacts(self, p: np.ndarray) -> List[Tuple[float, np.ndarray]]:
        d = p - self.axis_point
        radial = d - (d @ self.axis_dir) * self.axis_dir
        distance = float(np.linalg.norm(radial))
        penetration = self.radius - distance
        if penetration <= 0 or distance < 1e-12:
            return []
        return [(penetration, radial / distance)]

    def surface_point(self, x: float, y: float) -> Tuple[np.ndarray, np.ndarray]:
        """Top-surface point and outward normal above (x, y) for an axis along y."""
        cx, _, cz = self.axis_point
        dx = x - cx
        if abs(dx) >= self.radius:
            raise ConfigError(f"x={x} is outside the cylinder footprint")
        z = cz + math.sqrt(self.radius ** 2 - dx ** 2)
        normal = np.array([dx, 0.0, z - cz]) / self.radius
        return np.array([x, y, z]), normal

    def to_dict(self) -> dict:
        return {"type": "cylinder", "axis_point": self.axis_point.tolist(),
                "axis_dir": self.axis_dir.tolist(), "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class Hole:
    """
    Round hole in a flat top face, seen by the tip of a round peg.

    center is the middle of the hole opening on the top face; axis points out of
    the hole. A 45° chamfer of the given width widens the opening near the top.
    """

    center: np.ndarray
    axis: np.ndarray
    hole_radius: float
    peg_radius: float
    depth: float
    chamfer: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "axis", _unit(self.axis, "hole axis"))
        if not self.clearance > 0:
            raise ConfigError(f"hole clearance must be positive, got {self.clearance}")
        if not self.depth > 0 or self.chamfer < 0:
            raise ConfigError("hole depth must be positive and chamfer non-negative")

    @property
    def clearance(self) -> float:
        return self.hole_radius - self.peg_radius

    def contacts(self, p: np.ndarray) -> List[Tuple[float, np.ndarray]]:
        d = p - self.center
        height = float(d @ self.axis)
        if height >= 0:
            return []

        radial = d - height * self.axis
        offset = float(np.linalg.norm(radial))
        depth_in = -height
        found = []

        # Once the peg rim overlaps the material it is both below the top face
        # and inside the wall/chamfer; the shallower of the two resolves it.
        if offset > 1e-12:
            inward = -radial / offset
            widening = max(0.0, self.chamfer - depth_in)
            lateral = offset - (self.clearance + widening)
            if lateral > 0:
                if widening > 0:
                    side = (lateral / math.sqrt(2.0), (inward + self.axis) / math.sqrt(2.0))
                else:
                    side = (lateral, inward)
                found.append(side if side[0] < depth_in else (depth_in, self.axis))

        if depth_in > self.depth and offset < self.hole_radius:
            found.append((depth_in - self.depth, self.axis))
        return found

    def to_dict(self) -> dict:
        return {"type": "hole", "center": self.center.tolist(), "axis": self.axis.tolist(),
                "hole_radius": float(self.hole_radius), "peg_radius": float(self.peg_radius),
                "depth": float(self.depth), "chamfer": float(self.chamfer)}


GEOMETRY_TYPES = {"plane": Plane, "cylinder": Cylinder, "hole": Hole}


def geometry_from_dict(data: dict):
    data = dict(data)
    kind = data.pop("type", None)
    if kind not in GEOMETRY_TYPES:
        raise ConfigError(f"unknown contact geometry type '{kind}'")
    geometry_cls = GEOMETRY_TYPES[kind]
    config.check_keys(data, tuple(geometry_cls.__dataclass_fields__), f"contact.geometry ({kind})")
    return geometry_cls(**data)


@dataclass(frozen=True, eq=False)
class ContactModel:
    """Penalty contact with Coulomb friction (smoothed near zero slip)."""

    geometry: object
    k_env: float = config.CONTACT_STIFFNESS
    d_env: float = config.CONTACT_DAMPING
    mu: float = config.FRICTION_ERASE
    friction_smoothing: float = config.FRICTION_SMOOTHING

    def __post_init__(self):
        if not self.k_env > 0:
            raise ConfigError(f"k_env must be positive, got {self.k_env}")
        if self.d_env < 0 or self.mu < 0:
            raise ConfigError("d_env and mu must be non-negative")
        if not self.friction_smoothing > 0:
            raise ConfigError("friction_smoothing must be positive")

    def to_dict(self) -> dict:
        return {"geometry": self.geometry.to_dict(), "k_env": float(self.k_env),
                "d_env": float(self.d_env), "mu": float(self.mu),
                "friction_smoothing": float(self.friction_smoothing)}

    @classmethod
    def from_dict(cls, data: dict) -> "ContactModel":
        config.check_keys(data, tuple(cls.__dataclass_fields__), "contact")
        if "geometry" not in data:
            raise SchemaError("contact.geometry", "contact section is missing 'geometry'")
        return cls(
            geometry=geometry_from_dict(data["geometry"]),
            k_env=float(data.get("k_env", config.CONTACT_STIFFNESS)),
            d_env=float(data.get("d_env", config.CONTACT_DAMPING)),
            mu=float(data.get("mu", config.FRICTION_ERASE)),
            friction_smoothing=float(data.get("friction_smoothing", config.FRICTION_SMOOTHING)),
        )


def contact_wrench(pose: Pose, twist: Twist, contact: Optional[ContactModel]) -> Wrench:
    """
    Environment reaction on the tool point, in the world frame.

    Normal force: k_env·penetration − d_env·(velocity along the outward normal),
    clamped at zero. Friction opposes tangential slip with magnitude < mu·normal.

    Args:
        pose (Pose): Tool pose
        twist (Twist): Body twist of the tool
        contact (ContactModel | None): Environment (None = free space)

    Returns:
        Wrench: World-frame reaction (torque is zero for a point contact)
    """
    if contact is None:
        return Wrench.zero()

    position = pose.translation
    velocity = pose.rotation @ twist.v
    force = np.zeros(3)

    for penetration, normal in contact.geometry.contacts(position):
        normal_speed = float(velocity @ normal)
        f_normal = contact.k_env * penetration - contact.d_env * normal_speed
        if f_normal <= 0:
            continue
        slip = velocity - normal_speed * normal
        slip_speed = float(np.linalg.norm(slip))
        friction = -contact.mu * f_normal * slip / math.sqrt(slip_speed ** 2 + contact.friction_smoothing ** 2)
        force += f_normal * normal + friction

    return Wrench(force, np.zeros(3))


# ===== safety =====

@dataclass
class SafetyMonitor:
    """Trips once ‖force‖ stays above limit for dwell consecutive control steps."""

    limit: float = config.FORCE_LIMIT
    dwell: int = config.FORCE_DWELL_STEPS
    count: int = 0
    peak: float = 0.0                # largest force seen since the last reset

    def __post_init__(self):
        if not self.limit > 0:
            raise ConfigError(f"force limit must be positive, got {self.limit}")
        if self.dwell < 1:
            raise ConfigError(f"dwell must be >= 1, got {self.dwell}")

    def update(self, wrench: Wrench) -> bool:
        force = wrench.force_norm()
        self.peak = max(self.peak, force)
        if force > self.limit:
            self.count += 1
        else:
            self.count = 0
        return self.count >= self.dwell

    def reset(self) -> None:
        self.count = 0
        self.peak = 0.0


def safety_monitor(wrenches, limit: float = config.FORCE_LIMIT,
                   dwell: int = config.FORCE_DWELL_STEPS) -> Optional[int]:
    """
    Run the monitor over consecutive control-step wrenches.

    Returns:
        int | None: Index of the step that trips, or None when it passes
    """
    monitor = SafetyMonitor(limit, dwell)
    for index, wrench in enumerate(wrenches):
        if monitor.update(wrench):
            return index
    return None


@dataclass(frozen=True)
class StopEvent:
    """Why a playback ended early."""

    kind: str                  # "protective_stop" or "fault"
    sample_index: int
    control_step: int
    force: float
    message: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sample_index": self.sample_index,
                "control_step": self.control_step, "force": self.force, "message": self.message}

    @classmethod
    def from_dict(cls, data: dict) -> "StopEvent":
        return cls(data["kind"], int(data["sample_index"]), int(data["control_step"]),
                   float(data["force"]), data["message"])


# ===== dynamics =====

@dataclass(frozen=True, eq=False)
class PlantState:
    """
    Pose, body twist and world-frame external wrench of the virtual body, plus
    the pose error of the previous control step (for the D term).
    """

    pose: Pose
    twist: Twist = field(default_factory=Twist.zero)
    f_ext: Wrench = field(default_factory=Wrench.zero)
    error: np.ndarray = field(default_factory=lambda: np.zeros(6))

    @classmethod
    def at_rest(cls, pose: Pose, contact: Optional[ContactModel] = None) -> "PlantState":
        """At rest on its own pose (zero error)."""
        twist = Twist.zero()
        return cls(pose, twist, contact_wrench(pose, twist, contact), np.zeros(6))


def step(state: PlantState, ref_pose: Pose, params: ControllerParams,
         contact: Optional[ContactModel], dt: Optional[float] = None,
         velocity_limit: float = config.VELOCITY_LIMIT) -> PlantState:
    """
    Advance the plant by one control period.

    Args:
        state (PlantState): Current state
        ref_pose (Pose): Setpoint for this period
        params (ControllerParams): Gains and inertia
        contact (ContactModel | None): Environment
        dt (float): Period (defaults to 1/control_rate_hz)
        velocity_limit (float): Translational speed above which the step faults

    Returns:
        PlantState: State after the period

    Raises:
        SimFault: velocity limit exceeded, non-finite state or undefined pose error
    """
    dt = params.dt if dt is None else dt

    try:
        error = pose_log(compose(inverse(state.pose), ref_pose)).as_vector()
    except RotationNearPi as e:
        raise SimFault(f"pose error undefined: {e}") from e

    Rt = state.pose.rotation.T
    f_ext_body = np.concatenate([Rt @ state.f_ext.force, Rt @ state.f_ext.torque])
    twist = state.twist.as_vector()

    f_net = params.k_c * error + params.force_sign * f_ext_body
    stiffness_rate = params.k_c * (error - state.error) / dt
    f_c = params.k_p * f_net + params.k_d * stiffness_rate
    twist = twist + dt * (f_c / params.m_vm)

    if not np.all(np.isfinite(twist)):
        raise SimFault("non-finite twist")
    speed = float(np.linalg.norm(twist[:3]))
    if speed > velocity_limit:
        raise SimFault(f"speed {speed:.3f} m/s exceeds limit {velocity_limit} m/s")

    new_twist = Twist.from_vector(twist)
    new_pose = compose(state.pose, pose_exp(Twist.from_vector(dt * twist)))
    return PlantState(new_pose, new_twist, contact_wrench(new_pose, new_twist, contact), error)


@dataclass(frozen=True, eq=False)
class PlantContext:
    """
    Everything a playback needs besides the reference: controller, environment,
    safety limits and integrator options.
    """

    params: ControllerParams = field(default_factory=ControllerParams)
    contact: Optional[ContactModel] = None
    force_limit: float = config.FORCE_LIMIT
    dwell_steps: int = config.FORCE_DWELL_STEPS
    velocity_limit: float = config.VELOCITY_LIMIT
    interpolation: str = config.INTERPOLATION
    wrench_noise_std: float = 0.0
    seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        if self.interpolation not in ("zoh", "linear"):
            raise ConfigError(f"interpolation must be 'zoh' or 'linear', got '{self.interpolation}'")
        if self.wrench_noise_std < 0:
            raise ConfigError("wrench_noise_std must be non-negative")
        SafetyMonitor(self.force_limit, self.dwell_steps)

    def initial_state(self, pose: Pose) -> PlantState:
        return PlantState.at_rest(pose, self.contact)

    def steps_per_sample(self, rate_hz: float) -> int:
        ratio = self.params.control_rate_hz / rate_hz
        steps = int(round(ratio))
        if steps < 1 or abs(ratio - steps) > 1e-9:
            raise ConfigError(f"control rate {self.params.control_rate_hz} Hz is not a multiple of {rate_hz} Hz")
        return steps

    def replace(self, **changes) -> "PlantContext":
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return PlantContext(**values)

    def monitor(self) -> SafetyMonitor:
        return SafetyMonitor(self.force_limit, self.dwell_steps)

    def playback(self, ref: Trajectory, initial: Optional[PlantState] = None,
                 monitor: Optional[SafetyMonitor] = None):
        """
        Execute a reference trajectory through the plant.

        Each reference sample is applied for control_rate/rate control steps
        (held, or geodesically interpolated from the previous sample when
        interpolation='linear'); one measured sample with its wrench is
        recorded at the end of each hold.

        Args:
            ref (Trajectory): Reference at the record rate
            initial (PlantState): Starting state (default: at rest on ref[0])
            monitor (SafetyMonitor): Monitor to use (reset first); its peak is
                                     the largest control-step force afterwards

        Returns:
            tuple: (measured Trajectory or None, StopEvent or None). After a stop
                   the measured trajectory ends with the state at the stop.
        """
        steps = self.steps_per_sample(ref.rate_hz)
        if monitor is None:
            monitor = self.monitor()
        monitor.reset()
        rng = np.random.default_rng(self.seed)
        state = initial if initial is not None else self.initial_state(ref.poses[0])

        poses, wrenches = [], []
        stop = None
        previous = ref.poses[0]

        for k, target in enumerate(ref.poses):
            for j in range(1, steps + 1):
                setpoint = target
                if self.interpolation == "linear":
                    setpoint = geodesic_interpolate(previous, target, j / steps)
                try:
                    state = step(state, setpoint, self.params, self.contact,
                                 velocity_limit=self.velocity_limit)
                except SimFault as e:
                    stop = StopEvent("fault", k, k * steps + j, state.f_ext.force_norm(), str(e))
                    break
                if monitor.update(state.f_ext):
                    force = state.f_ext.force_norm()
                    stop = StopEvent("protective_stop", k, k * steps + j, force,
                                     f"|F| = {force:.2f} N above {self.force_limit} N "
                                     f"for {self.dwell_steps} steps")
                    break

            wrench = state.f_ext
            if self.wrench_noise_std > 0:
                wrench = Wrench.from_vector(wrench.as_vector() + rng.normal(0.0, self.wrench_noise_std, 6))
            poses.append(state.pose)
            wrenches.append(wrench)
            previous = target
            if stop is not None:
                break

        measured = None
        if len(poses) >= 2:
            measured = Trajectory(tuple(poses), tuple(wrenches), ref.rate_hz, f"measured:{ref.label}")
        return measured, stop

    # ----- config file sections -----

    def to_sections(self) -> dict:
        return {
            "controller": self.params.to_dict(),
            "contact": self.contact.to_dict() if self.contact is not None else None,
            "safety": {"force_limit": float(self.force_limit), "dwell_steps": int(self.dwell_steps),
                       "velocity_limit": float(self.velocity_limit)},
            "integrator": {"interpolation": self.interpolation,
                           "wrench_noise_std": float(self.wrench_noise_std), "seed": int(self.seed)},
        }

    @classmethod
    def from_sections(cls, data: dict) -> "PlantContext":
        safety = data.get("safety") or {}
        integrator = data.get("integrator") or {}
        contact = data.get("contact")
        config.check_keys(safety, ("force_limit", "dwell_steps", "velocity_limit"), "safety")
        config.check_keys(integrator, ("interpolation", "wrench_noise_std", "seed"), "integrator")
        return cls(
            params=ControllerParams.from_dict(data.get("controller") or {}),
            contact=ContactModel.from_dict(contact) if contact else None,
            force_limit=float(safety.get("force_limit", config.FORCE_LIMIT)),
            dwell_steps=int(safety.get("dwell_steps", config.FORCE_DWELL_STEPS)),
            velocity_limit=float(safety.get("velocity_limit", config.VELOCITY_LIMIT)),
            interpolation=integrator.get("interpolation", config.INTERPOLATION),
            wrench_noise_std=float(integrator.get("wrench_noise_std", 0.0)),
            seed=int(integrator.get("seed", config.DEFAULT_SEED)),
        )


def playback(ref: Trajectory, params: ControllerParams, contact: Optional[ContactModel],
             initial: Optional[PlantState] = None, **options):
    """Functional form of PlantContext.playback; options are PlantContext fields."""
    return PlantContext(params=params, contact=contact, **options).playback(ref, initial)
