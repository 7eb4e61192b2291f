"""
Geometry Module
Exact SE(3) primitives used by every update equation: composition, inversion,
exponential/logarithm maps and geodesic interpolation.

Poses store rotations as 3x3 matrices and serialize them as unit quaternions
(w, x, y, z) with w >= 0. All values are immutable and every function is pure.

The default maps are the coupled SE(3) exp/log (the translation goes through
the V matrix). Passing coupled=False switches to independent SO(3) x R^3 maps.
"""

from dataclasses import dataclass, field
import math
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from errors import RotationNearPi


SMALL_ANGLE = 1e-8            # below this the coefficient functions use Taylor series
PI_MARGIN = 1e-6              # log is refused for angles >= pi - PI_MARGIN
ORTHONORMAL_TOL = 1e-12


def skew(w) -> np.ndarray:
    """Hat operator: 3-vector -> skew-symmetric matrix."""
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def vee(S: np.ndarray) -> np.ndarray:
    """Vee operator: skew-symmetric matrix -> 3-vector."""
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project onto SO(3) when the matrix has drifted."""
    drift = np.max(np.abs(R.T @ R - np.eye(3)))
    if drift <= ORTHONORMAL_TOL and np.linalg.det(R) > 0:
        return R
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


@dataclass(frozen=True, eq=False)
class Twist:
    """Tangent element: v translational part (m), w rotational part (rad)."""

    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(3)
        w = np.asarray(self.w, dtype=float).reshape(3)
        object.__setattr__(self, "v", _frozen(v))
        object.__setattr__(self, "w", _frozen(w))

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, x) -> "Twist":
        x = np.asarray(x, dtype=float).reshape(6)
        return cls(x[:3], x[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v, self.w])

    def __repr__(self) -> str:
        return f"Twist(v={self.v.tolist()}, w={self.w.tolist()})"


@dataclass(frozen=True, eq=False)
class Pose:
    """
    Rigid-body transform.

    Attributes:
        rotation (ndarray): 3x3 rotation matrix, re-orthonormalized on construction
        translation (ndarray): 3-vector in meters
        quat (tuple): quaternion the pose was read from, reused when serializing
    """

    rotation: np.ndarray
    translation: np.ndarray
    quat: Optional[Tuple[float, float, float, float]] = field(default=None, repr=False)

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "rotation", _frozen(_orthonormalize(R)))
        object.__setattr__(self, "translation", _frozen(t))

    # ----- constructors -----

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, xyz) -> "Pose":
        return cls(np.eye(3), xyz)

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix(), translation)

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_quaternion(cls, wxyz, translation) -> "Pose":
        """
        Build a pose from a (w, x, y, z) quaternion.

        The quaternion is kept verbatim (sign-canonicalized) so that writing the
        pose back reproduces the same digits.
        """
        q = np.asarray(wxyz, dtype=float).reshape(4)
        if q[0] < 0:
            q = -q
        norm = np.linalg.norm(q)
        if not np.isfinite(norm) or norm < 1e-12:
            raise ValueError(f"invalid quaternion {q.tolist()}")
        w, x, y, z = q / norm
        R = Rotation.from_quat([x, y, z, w]).as_matrix()
        return cls(R, translation, quat=tuple(float(c) for c in q))

    # ----- accessors -----

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def to_quaternion(self) -> np.ndarray:
        """Unit quaternion (w, x, y, z) with w >= 0."""
        if self.quat is not None:
            return np.array(self.quat)
        x, y, z, w = Rotation.from_matrix(self.rotation).as_quat()
        q = np.array([w, x, y, z])
        if q[0] < 0:
            q = -q
        return q

    def rotation_angle(self) -> float:
        return _rotation_angle(self.rotation)

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        rot_err, trans_err = pose_distance(self, other)
        return rot_err <= atol and trans_err <= atol

    def __repr__(self) -> str:
        rv = Rotation.from_matrix(self.rotation).as_rotvec()
        return f"Pose(rotvec={rv.tolist()}, translation={self.translation.tolist()})"


# ===== coefficient functions =====

def _rotation_angle(R: np.ndarray) -> float:
    s = np.linalg.norm(vee(R - R.T)) / 2.0
    c = (np.trace(R) - 1.0) / 2.0
    return math.atan2(s, c)


def _exp_coefficients(theta: float):
    """A = sin(t)/t, B = (1 - cos t)/t^2, C = (t - sin t)/t^3."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    half = math.sin(theta / 2.0)
    A = math.sin(theta) / theta
    B = 2.0 * half * half / (theta * theta)
    C = (theta - math.sin(theta)) / theta ** 3
    return A, B, C


def _log_coefficients(theta: float):
    """theta / sin(theta) and (1 - (t/2) cot(t/2)) / t^2."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 + t2 / 6.0, 1.0 / 12.0 + t2 / 720.0
    half = theta / 2.0
    return theta / math.sin(theta), (1.0 - half / math.tan(half)) / (theta * theta)


# ===== group operations =====

def compose(a: Pose, b: Pose) -> Pose:
    """Group product a·b."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(p: Pose) -> Pose:
    Rt = p.rotation.T
    return Pose(Rt, -(Rt @ p.translation))


def pose_exp(x: Twist, coupled: bool = True) -> Pose:
    """
    Exponential map se(3) -> SE(3).

    Args:
        x (Twist): Tangent element
        coupled (bool): True for the SE(3) map, False for SO(3) x R^3

    Returns:
        Pose: exp(x)
    """
    if not (np.all(np.isfinite(x.v)) and np.all(np.isfinite(x.w))):
        raise ValueError("twist components must be finite")

    theta = float(np.linalg.norm(x.w))
    W = skew(x.w)
    W2 = W @ W
    A, B, C = _exp_coefficients(theta)
    R = np.eye(3) + A * W + B * W2

    if not coupled:
        return Pose(R, x.v)

    V = np.eye(3) + B * W + C * W2
    return Pose(R, V @ x.v)


def pose_log(p: Pose, coupled: bool = True) -> Twist:
    """
    Logarithm map SE(3) -> se(3) on the principal branch.

    Args:
        p (Pose): Transform with rotation angle < pi - PI_MARGIN
        coupled (bool): True for the SE(3) map, False for SO(3) x R^3

    Returns:
        Twist: log(p)

    Raises:
        RotationNearPi: rotation angle too close to pi
    """
    R = p.rotation
    theta = _rotation_angle(R)
    if theta >= math.pi - PI_MARGIN:
        raise RotationNearPi(theta)

    factor, D = _log_coefficients(theta)
    w = vee(R - R.T) / 2.0 * factor

    if not coupled:
        return Twist(p.translation, w)

    W = skew(w)
    V_inv = np.eye(3) - 0.5 * W + D * (W @ W)
    return Twist(V_inv @ p.translation, w)


def scale_twist(x: Twist, l: float) -> Twist:
    return Twist(x.v * l, x.w * l)


def geodesic_interpolate(a: Pose, b: Pose, s: float, coupled: bool = True) -> Pose:
    """a·exp(s·log(a⁻¹b)); s=0 returns a and s=1 returns b exactly."""
    if s == 0.0:
        return a
    if s == 1.0:
        return b
    delta = pose_log(compose(inverse(a), b), coupled=coupled)
    return compose(a, pose_exp(scale_twist(delta, s), coupled=coupled))


def pose_distance(a: Pose, b: Pose) -> Tuple[float, float]:
    """Frobenius rotation difference and Euclidean translation difference."""
    return (
        float(np.linalg.norm(a.rotation - b.rotation)),
        float(np.linalg.norm(a.translation - b.translation)),
    )


def rot_z(angle: float, translation=(0.0, 0.0, 0.0)) -> Pose:
    """Rotation about z by angle (rad) at the given translation."""
    c, s = math.cos(angle), math.sin(angle)
    return Pose(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), translation)
