"""Pinhole cameras, surround-view rigs, projection and pixel rays.

Camera frame convention: +z along the optical axis, +x right, +y down.
Extrinsics map ego coordinates into the camera frame
(``x_cam = R @ x_ego + t``).  Projection applies the rigid transform,
divides by the positive camera-frame depth and applies the intrinsics;
points behind the camera (depth <= EPS_DEPTH) or landing outside the
half-open pixel box [0, W) x [0, H) are reported as invisible (None).
Zero skew, no lens distortion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import PolarBox

__all__ = [
    "EPS_DEPTH",
    "CameraModel",
    "Rig",
    "EgoPose",
    "PixelPoint",
    "Ray",
    "project_to_view",
    "project_rig",
    "pixel_ray",
    "make_symmetric_rig",
    "temporal_project",
    "rotation_about_z",
    "max_rotation_discrepancy",
]

#: Minimum camera-frame depth considered in front of the camera.
EPS_DEPTH = 1e-6

_ORTHO_TOL = 1e-9


def rotation_about_z(angle: float) -> np.ndarray:
    """3x3 rotation by ``angle`` about the ego z axis (counter-clockwise)."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _check_rotation(rot: np.ndarray, name: str) -> np.ndarray:
    rot = np.asarray(rot, dtype=np.float64)
    if rot.shape != (3, 3):
        raise ValueError(f"{name}: rotation must be 3x3")
    if not np.isfinite(rot).all():
        raise ValueError(f"{name}: rotation must be finite")
    if np.abs(rot @ rot.T - np.eye(3)).max() > _ORTHO_TOL:
        raise ValueError(f"{name}: rotation is not orthonormal")
    if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
        raise ValueError(f"{name}: rotation must have determinant +1")
    return rot


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Ideal pinhole camera: intrinsics, rigid ego-to-camera extrinsics, image size."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError("CameraModel: focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("CameraModel: image size must be positive")
        rot = _check_rotation(self.rotation, "CameraModel")
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.isfinite(t).all():
            raise ValueError("CameraModel: translation must be finite")
        object.__setattr__(self, "rotation", _frozen(rot))
        object.__setattr__(self, "translation", _frozen(t))

    @property
    def intrinsic_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def optical_center(self) -> np.ndarray:
        """Camera center in ego coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ point + self.translation


@dataclass(frozen=True)
class Rig:
    """Ordered surround-view camera set; view indices are positions in the tuple."""

    cameras: tuple[CameraModel, ...]

    def __post_init__(self) -> None:
        cams = tuple(self.cameras)
        if len(cams) < 1:
            raise ValueError("Rig: at least one camera required")
        object.__setattr__(self, "cameras", cams)

    def __len__(self) -> int:
        return len(self.cameras)

    def __getitem__(self, k: int) -> CameraModel:
        return self.cameras[k]


@dataclass(frozen=True, eq=False)
class EgoPose:
    """Rigid transform taking current-frame ego coordinates to a past frame's.

    ``dt`` is the timestamp delta in seconds between the two frames.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dt: float = 0.0

    def __post_init__(self) -> None:
        rot = _check_rotation(self.rotation, "EgoPose")
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.isfinite(t).all():
            raise ValueError("EgoPose: translation must be finite")
        object.__setattr__(self, "rotation", _frozen(rot))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls, dt: float = 0.0) -> "EgoPose":
        return cls(np.eye(3), np.zeros(3), dt)

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=np.float64) + self.translation


@dataclass(frozen=True)
class PixelPoint:
    """Continuous pixel location with camera-frame depth in view ``view``."""

    u: float
    v: float
    depth: float
    view: int = 0


@dataclass(frozen=True, eq=False)
class Ray:
    """Half-line from a camera optical center through a pixel, in ego frame."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self) -> None:
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if not (np.isfinite(o).all() and np.isfinite(d).all()):
            raise ValueError("Ray: components must be finite")
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("Ray: direction must be a unit vector")
        object.__setattr__(self, "origin", _frozen(o))
        object.__setattr__(self, "direction", _frozen(d))

    def point_at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction

    def distance_to_point(self, point: np.ndarray) -> float:
        """Perpendicular distance from ``point`` to the ray's supporting line."""
        rel = np.asarray(point, dtype=np.float64) - self.origin
        along = float(rel @ self.direction)
        return float(np.linalg.norm(rel - along * self.direction))


def _as_point(point) -> np.ndarray:
    if isinstance(point, PolarBox):
        return point.center_xyz()
    p = np.asarray(point, dtype=np.float64).reshape(3)
    return p


def project_to_view(point, cam: CameraModel, view: int = 0) -> PixelPoint | None:
    """Project an ego-frame 3D point (or a polar box center) into one view.

    Returns None when the point is behind the camera or its pixel falls
    outside the image.
    """
    p = _as_point(point)
    if not np.isfinite(p).all():
        raise ValueError("project_to_view: non-finite point")
    pc = cam.to_camera(p)
    depth = float(pc[2])
    if depth <= EPS_DEPTH:
        return None
    u = cam.fx * pc[0] / depth + cam.cx
    v = cam.fy * pc[1] / depth + cam.cy
    if not (0.0 <= u < cam.width and 0.0 <= v < cam.height):
        return None
    return PixelPoint(u=float(u), v=float(v), depth=depth, view=view)


def project_rig(point, rig: Rig) -> list[PixelPoint | None]:
    """Project a point into every view of the rig (None where invisible)."""
    return [project_to_view(point, cam, view=k) for k, cam in enumerate(rig.cameras)]


def pixel_ray(u: float, v: float, cam: CameraModel) -> Ray:
    """Ego-frame unit ray from the optical center through pixel (u, v)."""
    if not (math.isfinite(u) and math.isfinite(v)):
        raise ValueError("pixel_ray: non-finite pixel")
    d_cam = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
    d_ego = cam.rotation.T @ d_cam
    d_ego /= np.linalg.norm(d_ego)
    return Ray(origin=cam.optical_center(), direction=d_ego)


# Orientation of a forward-looking camera (optical axis along ego +x):
# camera x = ego -y (right), camera y = ego -z (down), camera z = ego +x.
_FORWARD_CAMERA = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])


def make_symmetric_rig(
    count: int,
    fx: float = 800.0,
    fy: float = 800.0,
    cx: float = 800.0,
    cy: float = 450.0,
    width: int = 1600,
    height: int = 900,
    mount: tuple[float, float, float] = (1.0, 0.0, 1.6),
) -> Rig:
    """Build a rig of ``count`` identical cameras spaced 2*pi/count in yaw.

    Camera k looks along ego yaw 2*pi*k/count; the mount offset (camera
    center in ego coordinates for camera 0) rotates with it.  Rotating a
    scene point by 2*pi/count therefore maps its projection in view k to
    the identical pixel in view k+1.
    """
    if count < 2:
        raise ValueError("make_symmetric_rig: need at least 2 cameras")
    mount_v = np.asarray(mount, dtype=np.float64).reshape(3)
    cams = []
    for k in range(count):
        rz = rotation_about_z(2.0 * math.pi * k / count)
        rotation = _FORWARD_CAMERA @ rz.T
        center = rz @ mount_v
        cams.append(
            CameraModel(
                fx=fx,
                fy=fy,
                cx=cx,
                cy=cy,
                rotation=rotation,
                translation=-rotation @ center,
                width=width,
                height=height,
            )
        )
    return Rig(tuple(cams))


def temporal_project(point, cam: CameraModel, pose: EgoPose, view: int = 0) -> PixelPoint | None:
    """Project a current-frame point into a past frame's view via the ego pose."""
    p = _as_point(point)
    if not np.isfinite(p).all():
        raise ValueError("temporal_project: non-finite point")
    return project_to_view(pose.apply(p), cam, view=view)


def max_rotation_discrepancy(rig: Rig, points: np.ndarray) -> tuple[float, float]:
    """Self-check of rig view symmetry.

    Rotates each point by 2*pi/K and compares its projection in view k+1
    with the original projection in view k, over all views where the
    original is visible.  Returns (max pixel error, max depth error);
    both are ~1e-12 for a rig built by :func:`make_symmetric_rig`.
    """
    k_count = len(rig)
    delta = rotation_about_z(2.0 * math.pi / k_count)
    max_px = 0.0
    max_depth = 0.0
    for p in np.asarray(points, dtype=np.float64).reshape(-1, 3):
        rotated = delta @ p
        for k in range(k_count):
            base = project_to_view(p, rig[k], view=k)
            if base is None:
                continue
            moved = project_to_view(rotated, rig[(k + 1) % k_count], view=(k + 1) % k_count)
            if moved is None:
                return math.inf, math.inf
            max_px = max(max_px, abs(moved.u - base.u), abs(moved.v - base.v))
            max_depth = max(max_depth, abs(moved.depth - base.depth))
    return max_px, max_depth
