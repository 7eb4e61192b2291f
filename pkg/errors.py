"""
Errors Module
Exception types raised by the geometry, trajectory, plant and refinement layers.
"""


class AccelerationError(Exception):
    """Base class for every error raised by this package."""


class RotationNearPi(AccelerationError):
    """Logarithm requested for a rotation too close to π (branch ambiguity)."""

    def __init__(self, angle: float, index=None):
        self.angle = angle
        self.index = index
        where = f" at index {index}" if index is not None else ""
        super().__init__(f"rotation angle {angle:.9f} rad is at the cut locus{where}")

    def at_index(self, index: int) -> "RotationNearPi":
        return RotationNearPi(self.angle, index)


class TrajectoryError(AccelerationError, ValueError):
    """Trajectory invariant violated."""


class TooShort(TrajectoryError):
    """Operation would produce fewer than two samples."""


class LengthMismatch(TrajectoryError):
    """Trajectories that must align index-wise have different lengths."""


class ParseError(AccelerationError):
    """Malformed trajectory file content."""

    def __init__(self, line, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class SchemaError(AccelerationError):
    """A required field, column or config section is missing or invalid."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(message or f"missing field '{field}'")


class ConfigError(AccelerationError):
    """Invalid parameter value (gain, inertia, limit...)."""


class SimFault(AccelerationError):
    """Plant integration left its valid domain."""


class NoWrenchData(AccelerationError):
    """A force metric was requested on a trajectory without wrench samples."""


class DemoSafetyError(AccelerationError):
    """The synthetic demonstration itself tripped the safety monitor."""

    def __init__(self, stop):
        self.stop = stop
        super().__init__(f"demonstration stopped: {stop.message}")
