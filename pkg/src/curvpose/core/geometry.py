"""
Rigid geometry and pinhole cameras.

Poses map object (or world) coordinates into a target frame, cameras project
world points to pixels and back-project pixels to rays. Units are meters in
3D and pixels in 2D; pixel (row i, col j) has its center at (j + 0.5, i + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import (
    BehindCameraError,
    ConfigError,
    CurvposeError,
    InvalidPoseError,
    ParallelRaysError,
    SceneValidationError,
)

ORTHONORMAL_TOL = 1e-9
PARALLEL_TOL = 1e-9


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def orthonormalize(rotation: np.ndarray) -> np.ndarray:
    """Project a 3x3 matrix onto SO(3) (nearest rotation in Frobenius norm)."""
    u, _s, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1.0
        r = u @ vt
    return r


def orthonormality_error(rotation: np.ndarray) -> float:
    return float(np.max(np.abs(rotation.T @ rotation - np.eye(3))))


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform x -> R x + t.

    Attributes
    ----------
    rotation: 3x3 orthonormal matrix with determinant +1.
    translation: 3-vector in meters.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(rotation)) or not np.all(np.isfinite(translation)):
            raise InvalidPoseError("Pose contains non-finite values")
        if orthonormality_error(rotation) > ORTHONORMAL_TOL or np.linalg.det(rotation) <= 0:
            raise InvalidPoseError(
                "Rotation is not orthonormal with det +1 "
                f"(error {orthonormality_error(rotation):.3g})"
            )
        object.__setattr__(self, "rotation", _frozen(rotation))
        object.__setattr__(self, "translation", _frozen(translation))

    # -------------------- Constructors --------------------
    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> "Pose":
        """Build a pose from an axis-angle vector (radians) and a translation."""
        matrix = Rotation.from_rotvec(np.asarray(rotvec, dtype=np.float64)).as_matrix()
        return cls(matrix, translation)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Pose":
        return cls(np.asarray(data["rotation"], dtype=np.float64), data["translation"])

    # -------------------- Conversions --------------------
    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def as_rotvec(self) -> np.ndarray:
        """Axis-angle of the rotation; the norm is always within [0, pi]."""
        return Rotation.from_matrix(self.rotation).as_rotvec()

    def to_dict(self) -> Dict[str, Any]:
        """Rotation as 9 row-major values plus translation."""
        return {
            "rotation": [float(v) for v in self.rotation.reshape(-1)],
            "translation": [float(v) for v in self.translation],
        }

    # -------------------- Algebra --------------------
    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def transform(self, points) -> np.ndarray:
        """Apply the pose to an (N, 3) array (or a single 3-vector)."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def __hash__(self) -> int:
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0.0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0.0, atol=atol)
        )

    def __repr__(self) -> str:
        rotvec = np.round(self.as_rotvec(), 6).tolist()
        return f"Pose(rotvec={rotvec}, t={self.translation.tolist()})"


def compose(a: Pose, b: Pose) -> Pose:
    """Return the pose that applies `b` first, then `a`."""
    rotation = a.rotation @ b.rotation
    if orthonormality_error(rotation) > ORTHONORMAL_TOL:
        rotation = orthonormalize(rotation)
    return Pose(rotation, a.rotation @ b.translation + a.translation)


def inverse(pose: Pose) -> Pose:
    return pose.inverse()


@dataclass(frozen=True, eq=False)
class Ray:
    """Half-line origin + t * direction, t >= 0."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self) -> None:
        origin = np.array(self.origin, dtype=np.float64).reshape(3)
        direction = np.array(self.direction, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(direction)
        if norm == 0.0 or not np.isfinite(norm):
            raise ValueError("Ray direction must be a non-zero finite vector")
        object.__setattr__(self, "origin", _frozen(origin))
        object.__setattr__(self, "direction", _frozen(direction / norm))

    def point_at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True, eq=False)
class Camera:
    """Pinhole camera: intrinsics plus the world-to-camera pose.

    Camera frame convention: x right, y down, z along the optical axis.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    world_to_cam: Pose

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError(f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise ConfigError(f"Image size must be >= 1, got {self.width}x{self.height}")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def shape(self) -> Tuple[int, int]:
        """Image shape as (rows, cols)."""
        return (self.height, self.width)

    @property
    def intrinsics(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def center(self) -> np.ndarray:
        """Camera origin in world coordinates."""
        return -self.world_to_cam.rotation.T @ self.world_to_cam.translation

    def with_principal_point(self, cx: float, cy: float) -> "Camera":
        return Camera(self.fx, self.fy, cx, cy, self.width, self.height, self.world_to_cam)

    def to_camera_frame(self, points) -> np.ndarray:
        return self.world_to_cam.transform(points)

    def project_points(self, points_world) -> Tuple[np.ndarray, np.ndarray]:
        """Vectorized projection of (N, 3) world points.

        Returns (pixels (N, 2), depths (N,)); pixels with non-positive depth
        are NaN rather than raising.
        """
        pc = self.to_camera_frame(np.atleast_2d(np.asarray(points_world, dtype=np.float64)))
        z = pc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * pc[:, 0] / z + self.cx
            v = self.fy * pc[:, 1] / z + self.cy
        pixels = np.stack([u, v], axis=1)
        pixels[z <= 0] = np.nan
        return pixels, z

    def to_dict(self) -> Dict[str, Any]:
        pose = self.world_to_cam.to_dict()
        return {
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "w": self.width,
            "h": self.height,
            "world_to_cam": {"rotation": pose["rotation"], "translation": pose["translation"]},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Camera":
        try:
            return cls(
                fx=float(data["fx"]),
                fy=float(data["fy"]),
                cx=float(data["cx"]),
                cy=float(data["cy"]),
                width=int(data["w"]),
                height=int(data["h"]),
                world_to_cam=Pose.from_dict(data["world_to_cam"]),
            )
        except (KeyError, TypeError) as e:
            raise SceneValidationError(f"Incomplete camera entry: {e!r}")
        except ValueError as e:
            if isinstance(e, CurvposeError):
                raise
            raise SceneValidationError(f"Non-numeric camera field: {e}")


def project(camera: Camera, point_world) -> np.ndarray:
    """Project a single world point to pixel coordinates (u, v)."""
    x, y, z = camera.to_camera_frame(np.asarray(point_world, dtype=np.float64).reshape(3))
    if z <= 0:
        raise BehindCameraError(f"Point has non-positive camera depth {z:.6g} m")
    return np.array([camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy])


def pixel_ray(camera: Camera, pixel) -> Ray:
    """Back-project a pixel coordinate to a world-frame ray from the camera center."""
    u, v = float(pixel[0]), float(pixel[1])
    d_cam = np.array([(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0])
    d_world = camera.world_to_cam.rotation.T @ d_cam
    return Ray(camera.center, d_world)


def ray_pair_midpoint(a: Ray, b: Ray) -> Tuple[np.ndarray, float]:
    """Midpoint and gap of the closest points between two rays.

    Ray parameters are restricted to t >= 0. Raises ParallelRaysError when the
    directions are parallel within 1e-9.
    """
    cos = float(a.direction @ b.direction)
    if abs(cos) > 1.0 - PARALLEL_TOL:
        raise ParallelRaysError(f"Rays are parallel (|cos| = {abs(cos):.12f})")
    w0 = a.origin - b.origin
    d = float(a.direction @ w0)
    e = float(b.direction @ w0)
    denom = 1.0 - cos * cos
    s = (cos * e - d) / denom
    t = (e - cos * d) / denom
    if s < 0.0 or t < 0.0:
        # Unconstrained minimum lies outside the quadrant; the convex minimum
        # is then on one of the two boundary edges.
        options = [(0.0, max(0.0, e)), (max(0.0, -d), 0.0)]
        best = None
        for s_c, t_c in options:
            gap_c = float(np.linalg.norm(a.point_at(s_c) - b.point_at(t_c)))
            if best is None or gap_c < best[0]:
                best = (gap_c, s_c, t_c)
        _gap, s, t = best
    pa = a.point_at(s)
    pb = b.point_at(t)
    return 0.5 * (pa + pb), float(np.linalg.norm(pa - pb))


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """World-to-camera pose for a camera at `eye` looking at `target`."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-12:
        raise ConfigError("look_at: viewing direction is parallel to the up vector")
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    cam_to_world = np.stack([right, down, forward], axis=1)
    rotation = cam_to_world.T
    return Pose(rotation, -rotation @ eye)
