"""Rigid-body algebra on poses in millimetres.

Rotations are plain ``(3, 3)`` float arrays. Poses and deltas are frozen
dataclasses holding read-only arrays.

The pose-difference / pose-increment pair uses a right (body-frame) delta:
``apply_delta(base, d)`` rotates by ``exp(d.rotation_vector)`` in the base
frame and translates by ``base.rotation @ d.translation``. Rotation and
translation are decoupled, so scaling a delta scales the straight-line
translation and the geodesic rotation independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.transform import Rotation as _ScipyRotation

from .errors import AmbiguousAxisError, InvalidInputError, InvalidParameterError

# Distance from pi below which the log axis is treated as undetermined.
_PI_GUARD = 1e-10
_SMALL_ANGLE = 1e-8
_ORTHO_TOL = 1e-6


def _frozen(a: ArrayLike, shape: tuple[int, ...]) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64)
    if arr.shape != shape:
        raise InvalidInputError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def hat(v: ArrayLike) -> NDArray[np.float64]:
    """Skew-symmetric matrix with ``hat(v) @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=np.float64)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def exp_rotation(v: ArrayLike) -> NDArray[np.float64]:
    """Rotation matrix for the rotation vector ``v`` (radians), via Rodrigues."""
    v = np.asarray(v, dtype=np.float64)
    theta = float(np.linalg.norm(v))
    K = hat(v)
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta * theta / 6.0
        b = 0.5 - theta * theta / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def log_rotation(R: ArrayLike) -> NDArray[np.float64]:
    """Rotation vector of ``R`` on the canonical branch (angle in ``[0, pi)``).

    Raises:
        AmbiguousAxisError: if the rotation angle is pi (to within 1e-10).
    """
    R = np.asarray(R, dtype=np.float64)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = float(np.linalg.norm(w))
    c = 0.5 * (float(np.trace(R)) - 1.0)
    theta = math.atan2(s, c)
    if theta < _SMALL_ANGLE:
        return w * (1.0 + theta * theta / 6.0)
    if math.pi - theta < _PI_GUARD:
        raise AmbiguousAxisError(f"rotation angle {theta!r} is pi; axis is ambiguous")
    if c > -0.5:
        return (theta / s) * w
    # Near pi the antisymmetric part is tiny; take the axis from the symmetric
    # part, (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) u u^T.
    B = 0.5 * (R + R.T) - c * np.eye(3)
    i = int(np.argmax(np.diag(B)))
    u = B[:, i] / math.sqrt(B[i, i] * (1.0 - c))
    u /= np.linalg.norm(u)
    if float(u @ w) < 0.0:
        u = -u
    return theta * u


def rot_x(angle: float) -> NDArray[np.float64]:
    return exp_rotation([angle, 0.0, 0.0])


def rot_y(angle: float) -> NDArray[np.float64]:
    return exp_rotation([0.0, angle, 0.0])


def rot_z(angle: float) -> NDArray[np.float64]:
    return exp_rotation([0.0, 0.0, angle])


def rotation_angle(a: ArrayLike, b: ArrayLike) -> float:
    """Angle (radians, in [0, pi]) of the relative rotation ``a^T b``."""
    rel = np.asarray(a, dtype=np.float64).T @ np.asarray(b, dtype=np.float64)
    w = 0.5 * np.array([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]])
    return math.atan2(float(np.linalg.norm(w)), 0.5 * (float(np.trace(rel)) - 1.0))


def rotation_angle_deg(a: ArrayLike, b: ArrayLike) -> float:
    """Axis-angle magnitude of ``a^-1 b`` in degrees, in ``[0, 180]``."""
    return math.degrees(rotation_angle(a, b))


def quaternion_from_matrix(R: ArrayLike) -> NDArray[np.float64]:
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0``."""
    q = _ScipyRotation.from_matrix(np.asarray(R, dtype=np.float64)).as_quat(scalar_first=True)
    return -q if q[0] < 0 else q


def matrix_from_quaternion(q: ArrayLike) -> NDArray[np.float64]:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,) or not np.isfinite(q).all() or np.linalg.norm(q) == 0.0:
        raise InvalidInputError(f"quaternion must be a finite non-zero 4-vector, got {q!r}")
    return _ScipyRotation.from_quat(q, scalar_first=True).as_matrix()


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``x -> rotation @ x + translation`` (translation in mm)."""

    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]

    def __post_init__(self) -> None:
        R = _frozen(self.rotation, (3, 3))
        t = _frozen(self.translation, (3,))
        if not (np.isfinite(R).all() and np.isfinite(t).all()):
            raise InvalidInputError("pose entries must be finite")
        if np.abs(R @ R.T - np.eye(3)).max() > _ORTHO_TOL or np.linalg.det(R) < 0:
            raise InvalidInputError("rotation must be a proper orthonormal matrix")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T: ArrayLike) -> Pose:
        T = np.asarray(T, dtype=np.float64)
        if T.shape != (4, 4):
            raise InvalidInputError(f"expected a 4x4 matrix, got {T.shape}")
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_rotvec(cls, rotvec: ArrayLike, translation: ArrayLike = (0.0, 0.0, 0.0)) -> Pose:
        return cls(exp_rotation(rotvec), translation)

    def as_matrix(self) -> NDArray[np.float64]:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def transform(self, points: ArrayLike) -> NDArray[np.float64]:
        """Apply the pose to an ``(N, 3)`` array of points."""
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {
            "rotation": [float(x) for x in quaternion_from_matrix(self.rotation)],
            "translation_mm": [float(x) for x in self.translation],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Pose:
        return cls(matrix_from_quaternion(d["rotation"]), d["translation_mm"])

    def __repr__(self) -> str:
        rv = _ScipyRotation.from_matrix(self.rotation).as_rotvec(degrees=True)
        return f"Pose(rotvec_deg={np.round(rv, 6).tolist()}, t_mm={np.round(self.translation, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class PoseDelta:
    """Body-frame increment: rotation vector (rad, norm < pi) and translation (mm)."""

    rotation_vector: NDArray[np.float64]
    translation: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation_vector", _frozen(self.rotation_vector, (3,)))
        object.__setattr__(self, "translation", _frozen(self.translation, (3,)))
        if np.linalg.norm(self.rotation_vector) >= math.pi:
            raise AmbiguousAxisError("rotation vector magnitude must be below pi")

    @classmethod
    def zero(cls) -> PoseDelta:
        return cls(np.zeros(3), np.zeros(3))

    @property
    def angle(self) -> float:
        return float(np.linalg.norm(self.rotation_vector))


def compose(a: Pose, b: Pose) -> Pose:
    """``a @ b``: apply ``b`` first, then ``a``."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(a: Pose) -> Pose:
    Rt = a.rotation.T
    return Pose(Rt, -(Rt @ a.translation))


def pose_diff(target: Pose, base: Pose) -> PoseDelta:
    """Body-frame delta ``d`` such that ``apply_delta(base, d)`` is ``target``.

    Raises:
        AmbiguousAxisError: if the relative rotation is a half turn.
    """
    Rt = base.rotation.T
    return PoseDelta(
        log_rotation(Rt @ target.rotation),
        Rt @ (target.translation - base.translation),
    )


def apply_delta(base: Pose, d: PoseDelta) -> Pose:
    return Pose(
        base.rotation @ exp_rotation(d.rotation_vector),
        base.translation + base.rotation @ d.translation,
    )


def scale_delta(d: PoseDelta, alpha: float) -> PoseDelta:
    """Shrink a delta geodesically; ``alpha`` must lie in ``(0, 1]``."""
    if not 0.0 < alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha!r}")
    if alpha == 1.0:
        return d
    return PoseDelta(alpha * d.rotation_vector, alpha * d.translation)


def pose_distance(a: Pose, b: Pose) -> tuple[float, float]:
    """(rotation angle in rad, translation distance in mm) between two poses."""
    return rotation_angle(a.rotation, b.rotation), float(np.linalg.norm(a.translation - b.translation))


def random_rotation(rng: np.random.Generator, max_angle: float = math.pi) -> NDArray[np.float64]:
    """Rotation with uniformly random axis and angle uniform in ``[0, max_angle)``."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return exp_rotation(axis * rng.uniform(0.0, max_angle))
