"""
Configuration Module
System-wide defaults for demonstration acceleration and the scenario file layer.
"""

from pathlib import Path

import yaml

from errors import SchemaError


# ===== FDCC CONTROLLER (x, y, z, rx, ry, rz) =====
STIFFNESS = (300.0, 300.0, 300.0, 100.0, 100.0, 100.0)       # N/m, N·m/rad
PD_PROPORTIONAL = (0.0252, 0.0252, 0.0252, 0.36, 0.36, 0.36)  # dimensionless
PD_DERIVATIVE = (0.0072,) * 6                                 # seconds
VIRTUAL_INERTIA = (1.0, 1.0, 1.0, 0.1, 0.1, 0.1)              # kg, kg·m²
FORCE_SIGN = 1.0                    # +1 adds the environment reaction to the stiffness wrench

# ===== RATES =====
CONTROL_RATE_HZ = 500.0             # controller / integrator rate
RECORD_RATE_HZ = 50.0               # demonstration and reference sample rate

# ===== CONTACT =====
CONTACT_STIFFNESS = 1.0e4           # N/m
CONTACT_DAMPING = 50.0              # N·s/m
FRICTION_ERASE = 0.3
FRICTION_PEG = 0.1
FRICTION_SMOOTHING = 1.0e-3         # m/s - tangential speed where friction reaches ~70% of mu·Fn

# ===== SAFETY MONITOR =====
FORCE_LIMIT = 100.0                 # N - protective stop threshold
FORCE_DWELL_STEPS = 2               # consecutive control steps above limit before tripping
VELOCITY_LIMIT = 5.0                # m/s - simulation fault above this
INTERPOLATION = "zoh"               # "zoh" or "linear"

# ===== TASKS =====
DEMO_DURATION_S = 20.0
PEG_DEMO_DURATION_S = 15.0
PRESS_DEPTH = 0.020                 # m - reference depth below the surface; k_c and k_env in series give ~5.8 N
HOVER_HEIGHT = 0.010                # m
ARC_RADIUS = 0.10                   # m
CYLINDER_RADIUS = 0.15              # m
HOLE_RADIUS = 0.010                 # m
PEG_RADIUS = 0.009                  # m
HOLE_DEPTH = 0.030                  # m
HOLE_CHAMFER = 0.001                # m
INSERTION_DEPTH = 0.025             # m
JITTER_AMPLITUDE = 0.0005           # m RMS
JITTER_CUTOFF_HZ = 1.0

# ===== REFINEMENT =====
MAX_SPEED = 10
ITERATIONS_PER_SPEED = 3
LEARNING_GAIN = 0.4

# ===== DATASET =====
DATASET_ROLLOUTS = 10
NOISE_SIGMA_POS = 0.001             # m
NOISE_SIGMA_ROT = 0.005             # rad

# ===== FILES =====
FORMAT_VERSION = 1
FLOAT_FORMAT = "%.17g"
DEFAULT_SEED = 0

# ===== EXIT CODES =====
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_STOPPED = 3
EXIT_SIM_FAULT = 4

# ===== OUTPUTS =====
EMIT_CHOICES = ("tables", "curves", "plots")     # compare / refine --emit

CONFIG_SECTIONS = ("task", "controller", "contact", "safety", "integrator")


def load_config_file(path) -> dict:
    """
    Load a versioned scenario/params YAML file.

    Args:
        path (str | Path): YAML file path

    Returns:
        dict: Parsed document with every section present
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise SchemaError("yaml", f"{path}: {e}") from e

    if not isinstance(data, dict):
        raise SchemaError("format_version", f"{path}: not a mapping")
    if "format_version" not in data:
        raise SchemaError("format_version", f"{path}: missing format_version")
    if data["format_version"] != FORMAT_VERSION:
        raise SchemaError("format_version", f"{path}: unsupported version {data['format_version']}")

    for section in CONFIG_SECTIONS:
        if section not in data:
            raise SchemaError(section, f"{path}: missing section '{section}'")
    check_keys(data, ("format_version",) + CONFIG_SECTIONS, "scenario")

    return data


def check_keys(data: dict, allowed, section: str) -> None:
    """
    Reject keys a config section does not define.

    Raises:
        SchemaError: field is "<section>.<key>" of the first unknown key
    """
    for key in data:
        if key not in allowed:
            raise SchemaError(f"{section}.{key}",
                              f"unknown key '{key}' in {section} (expected one of {', '.join(allowed)})")


def save_config_file(data: dict, path) -> Path:
    """
    Write a scenario/params YAML file (sections in canonical order).

    Args:
        data (dict): Document with the sections of CONFIG_SECTIONS
        path (str | Path): Destination

    Returns:
        Path: Written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    document = {"format_version": FORMAT_VERSION}
    for section in CONFIG_SECTIONS:
        document[section] = data[section]

    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(document, f, sort_keys=False, default_flow_style=None)

    return path
