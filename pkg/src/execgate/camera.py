"""Pinhole camera, target point models and the mean reprojection score.

Pixel observations are ``(N, 2)`` float arrays, index-matched to the rows of
a :class:`TargetModel`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    BehindCameraError,
    DegenerateConfigurationError,
    InsufficientPointsError,
    InvalidInputError,
    InvalidParameterError,
)
from .se3 import Pose

MIN_DEPTH_MM = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    """Distortion-free pinhole intrinsics in pixels."""

    fx: float = 800.0
    fy: float = 800.0
    cx: float = 320.0
    cy: float = 320.0

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidParameterError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def as_matrix(self) -> NDArray[np.float64]:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}


@dataclass(frozen=True, eq=False)
class TargetModel:
    """Ordered 3D feature points (mm) in the target frame."""

    points: NDArray[np.float64]
    name: str = "custom"

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidInputError(f"target points must be (N, 3), got {pts.shape}")
        if len(pts) < 4:
            raise InsufficientPointsError(f"a target model needs at least 4 points, got {len(pts)}")
        sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
        if sv[1] <= 1e-9 * max(sv[0], 1.0):
            raise DegenerateConfigurationError("target points are collinear")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def centroid(self) -> NDArray[np.float64]:
        return self.points.mean(axis=0)

    @classmethod
    def box(cls, sx: float = 100.0, sy: float = 100.0, sz: float = 40.0) -> TargetModel:
        """The 8 vertices of an ``sx`` x ``sy`` x ``sz`` box centred at the origin."""
        signs = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=np.float64)
        return cls(0.5 * signs * np.array([sx, sy, sz]), name="box")

    @classmethod
    def from_file(cls, path: str | Path) -> TargetModel:
        """Read one ``x y z`` point (mm) per line; ``#`` starts a comment."""
        rows = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.replace(",", " ").split()
            if len(fields) != 3:
                raise InvalidInputError(f"{path}:{lineno}: expected 3 coordinates, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
        return cls(np.array(rows).reshape(-1, 3), name=str(path))


def default_target() -> TargetModel:
    return TargetModel.box()


def load_target(spec: str) -> TargetModel:
    """Resolve a builtin target name (``"box"``) or a point-file path."""
    if spec == "box":
        return default_target()
    return TargetModel.from_file(spec)


def project_points(k: Intrinsics, points_cam: ArrayLike) -> NDArray[np.float64]:
    """Project camera-frame points to pixels, checking depth."""
    pc = np.asarray(points_cam, dtype=np.float64)
    z = pc[:, 2]
    bad = np.flatnonzero(~(z > MIN_DEPTH_MM))
    if bad.size:
        raise BehindCameraError(int(bad[0]), float(z[bad[0]]))
    return np.column_stack((k.fx * pc[:, 0] / z + k.cx, k.fy * pc[:, 1] / z + k.cy))


def project(k: Intrinsics, cam_from_target: Pose, target: TargetModel) -> NDArray[np.float64]:
    """Pixels of every target point seen through ``cam_from_target``."""
    return project_points(k, cam_from_target.transform(target.points))


def reprojection_error(observed: ArrayLike, reprojected: ArrayLike) -> float:
    """Mean Euclidean pixel distance between two index-matched point lists."""
    a = np.asarray(observed, dtype=np.float64)
    b = np.asarray(reprojected, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 2:
        raise InvalidInputError(f"mismatched pixel arrays: {a.shape} vs {b.shape}")
    if len(a) == 0:
        raise InvalidInputError("reprojection error of an empty point list")
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


def add_pixel_noise(obs: ArrayLike, sigma: float, rng: np.random.Generator) -> NDArray[np.float64]:
    """Add i.i.d. zero-mean Gaussian noise with std ``sigma`` px to every coordinate."""
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be non-negative, got {sigma!r}")
    obs = np.asarray(obs, dtype=np.float64)
    if sigma == 0:
        return obs.copy()
    return obs + rng.normal(0.0, sigma, size=obs.shape)
