"""
Software triangle rasterizer.

Produces per-view depth (camera z, meters), object-index and view-space
normal maps with a z-buffer. Sampling happens at pixel centers
(j + 0.5, i + 0.5) without anti-aliasing; faces are double-sided and their
flat normals are flipped to face the camera.

All (triangle, pixel) fragments of a mesh are evaluated as flat numpy arrays
and resolved per pixel by depth; ties keep the lower triangle index. A
`PixelWindow` restricts rendering to a sub-rectangle of the image.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core.geometry import Camera, Pose
from .mesh import Mesh

logger = logging.getLogger(__name__)

EMPTY_INDEX = -1
NEAR_PLANE = 1e-6
EDGE_EPS = 1e-12
# Upper bound on fragments evaluated in one vectorized pass.
MAX_FRAGMENTS = 1 << 20


@dataclass(frozen=True)
class PixelWindow:
    """Rows [row0, row1) and columns [col0, col1) of an image."""

    row0: int
    row1: int
    col0: int
    col1: int

    @classmethod
    def full(cls, shape: Tuple[int, int]) -> "PixelWindow":
        return cls(0, int(shape[0]), 0, int(shape[1]))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.row1 - self.row0, self.col1 - self.col0)

    @property
    def slices(self) -> Tuple[slice, slice]:
        return slice(self.row0, self.row1), slice(self.col0, self.col1)

    def grow(self, margin: int, shape: Tuple[int, int]) -> "PixelWindow":
        """Window enlarged by `margin` pixels on every side, clipped to the image."""
        return PixelWindow(
            max(self.row0 - margin, 0),
            min(self.row1 + margin, int(shape[0])),
            max(self.col0 - margin, 0),
            min(self.col1 + margin, int(shape[1])),
        )

    def relative_to(self, outer: "PixelWindow") -> Tuple[slice, slice]:
        """Slices selecting this window inside buffers that cover `outer`."""
        return (
            slice(self.row0 - outer.row0, self.row1 - outer.row0),
            slice(self.col0 - outer.col0, self.col1 - outer.col0),
        )


@dataclass
class ViewBuffers:
    """Z-buffer state of one view.

    Attributes
    ----------
    depth: (H, W) camera-frame depth, +inf where empty.
    index: (H, W) int32 instance index, EMPTY_INDEX where empty.
    normals: (H, W, 3) view-space unit normals, zero vectors where empty.
    """

    depth: np.ndarray
    index: np.ndarray
    normals: np.ndarray

    @classmethod
    def empty(cls, shape: Tuple[int, int]) -> "ViewBuffers":
        h, w = shape
        return cls(
            depth=np.full((h, w), np.inf),
            index=np.full((h, w), EMPTY_INDEX, dtype=np.int32),
            normals=np.zeros((h, w, 3)),
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.depth.shape  # type: ignore[return-value]

    @property
    def coverage(self) -> np.ndarray:
        return self.index != EMPTY_INDEX

    def copy(self) -> "ViewBuffers":
        return ViewBuffers(self.depth.copy(), self.index.copy(), self.normals.copy())

    def crop(self, window: PixelWindow) -> "ViewBuffers":
        rows, cols = window.slices
        return ViewBuffers(
            self.depth[rows, cols].copy(),
            self.index[rows, cols].copy(),
            self.normals[rows, cols].copy(),
        )


def rasterize(
    meshes: Sequence[Mesh],
    poses: Sequence[Pose],
    camera: Camera,
    base: Optional[ViewBuffers] = None,
    first_index: int = 0,
    window: Optional[PixelWindow] = None,
) -> ViewBuffers:
    """Render posed meshes into a single view.

    Args:
        meshes: meshes in object frames
        poses: object-to-world pose per mesh
        camera: target view
        base: optional full-size buffers already holding other objects; copied, not modified
        first_index: instance index written for meshes[0] (then +1 per mesh)
        window: optional sub-rectangle; the result then has the window's shape

    Returns:
        New ViewBuffers with the nearest surface per pixel.
    """
    if len(meshes) != len(poses):
        raise ValueError(f"Got {len(meshes)} meshes but {len(poses)} poses")
    window = window or PixelWindow.full(camera.shape)
    if base is not None:
        buffers = base.crop(window)
    else:
        buffers = ViewBuffers.empty(window.shape)
    for k, (mesh, pose) in enumerate(zip(meshes, poses)):
        _rasterize_instance(buffers, window, mesh, pose, camera, first_index + k)
    return buffers


def screen_window(
    meshes: Sequence[Mesh], poses: Sequence[Pose], camera: Camera
) -> Optional[PixelWindow]:
    """Smallest window holding every pixel the posed meshes can cover, or None."""
    points = [
        camera.to_camera_frame(pose.transform(mesh.vertices)) for mesh, pose in zip(meshes, poses)
    ]
    if not points:
        return None
    cam = np.vstack(points)
    cam = cam[cam[:, 2] > NEAR_PLANE]
    if len(cam) == 0:
        return None
    u = camera.fx * cam[:, 0] / cam[:, 2] + camera.cx
    v = camera.fy * cam[:, 1] / cam[:, 2] + camera.cy
    h, w = camera.shape
    col0 = int(np.clip(np.ceil(u.min() - 0.5), 0, w))
    col1 = int(np.clip(np.floor(u.max() - 0.5), -1, w - 1)) + 1
    row0 = int(np.clip(np.ceil(v.min() - 0.5), 0, h))
    row1 = int(np.clip(np.floor(v.max() - 0.5), -1, h - 1)) + 1
    if col1 <= col0 or row1 <= row0:
        return None
    return PixelWindow(row0, row1, col0, col1)


def _rasterize_instance(
    buffers: ViewBuffers,
    window: PixelWindow,
    mesh: Mesh,
    pose: Pose,
    camera: Camera,
    object_index: int,
) -> None:
    cam_vertices = camera.to_camera_frame(pose.transform(mesh.vertices))
    tris = cam_vertices[mesh.triangles]  # (M, 3, 3)
    if len(tris) == 0:
        return

    z = tris[:, :, 2]
    in_front = np.all(z > NEAR_PLANE, axis=1)
    if not np.all(in_front):
        logger.debug(f"Skipping {int((~in_front).sum())} triangles crossing the near plane")

    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * tris[:, :, 0] / z + camera.cx
        v = camera.fy * tris[:, :, 1] / z + camera.cy

    normals = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    lengths = np.linalg.norm(normals, axis=1)
    area = (u[:, 1] - u[:, 0]) * (v[:, 2] - v[:, 0]) - (u[:, 2] - u[:, 0]) * (v[:, 1] - v[:, 0])
    valid = in_front & (lengths > 0) & (np.abs(area) > EDGE_EPS)
    normals[valid] /= lengths[valid, None]
    # Orient toward the camera: n . p <= 0 for every point p of the plane.
    facing_away = np.einsum("ij,ij->i", normals, tris[:, 0]) > 0
    normals[facing_away] *= -1.0

    ids = np.flatnonzero(valid)
    if ids.size == 0:
        return
    uu, vv = u[ids], v[ids]
    j0 = np.clip(np.ceil(uu.min(axis=1) - 0.5), window.col0, window.col1).astype(np.int64)
    j1 = np.clip(np.floor(uu.max(axis=1) - 0.5), window.col0 - 1, window.col1 - 1)
    i0 = np.clip(np.ceil(vv.min(axis=1) - 0.5), window.row0, window.row1).astype(np.int64)
    i1 = np.clip(np.floor(vv.max(axis=1) - 0.5), window.row0 - 1, window.row1 - 1)
    nx = j1.astype(np.int64) - j0 + 1
    ny = i1.astype(np.int64) - i0 + 1
    hit = (nx > 0) & (ny > 0)
    ids, j0, i0, nx, ny = ids[hit], j0[hit], i0[hit], nx[hit], ny[hit]
    counts = nx * ny

    start = 0
    while start < len(ids):
        fits = int(np.searchsorted(np.cumsum(counts[start:]), MAX_FRAGMENTS, side="right"))
        stop = start + max(fits, 1)
        part = slice(start, stop)
        rows, cols, tri = _fragments(i0[part], j0[part], nx[part], counts[part])
        m = ids[part][tri]
        um, vm, zm = u[m], v[m], z[m]
        xs = cols + 0.5
        ys = rows + 0.5
        inv_area = 1.0 / area[m]
        b0 = ((um[:, 1] - xs) * (vm[:, 2] - ys) - (um[:, 2] - xs) * (vm[:, 1] - ys)) * inv_area
        b1 = ((um[:, 2] - xs) * (vm[:, 0] - ys) - (um[:, 0] - xs) * (vm[:, 2] - ys)) * inv_area
        b2 = 1.0 - b0 - b1
        inside = (b0 >= -EDGE_EPS) & (b1 >= -EDGE_EPS) & (b2 >= -EDGE_EPS)
        # 1/z is affine in screen space for a planar triangle.
        with np.errstate(divide="ignore"):
            depth = 1.0 / (b0 / zm[:, 0] + b1 / zm[:, 1] + b2 / zm[:, 2])
        _resolve(
            buffers,
            rows[inside] - window.row0,
            cols[inside] - window.col0,
            depth[inside],
            normals[m[inside]],
            object_index,
        )
        start = stop


def _fragments(
    i0: np.ndarray, j0: np.ndarray, nx: np.ndarray, counts: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pixel rows, columns and owning triangle of every bounding-box fragment."""
    tri = np.repeat(np.arange(len(counts)), counts)
    local = np.arange(int(counts.sum())) - np.repeat(np.cumsum(counts) - counts, counts)
    return i0[tri] + local // nx[tri], j0[tri] + local % nx[tri], tri


def _resolve(
    buffers: ViewBuffers,
    rows: np.ndarray,
    cols: np.ndarray,
    depth: np.ndarray,
    normals: np.ndarray,
    object_index: int,
) -> None:
    """Write the nearest fragment per pixel where it beats the buffer."""
    if depth.size == 0:
        return
    flat = rows * buffers.shape[1] + cols
    order = np.lexsort((depth, flat))
    flat_sorted = flat[order]
    first = order[np.flatnonzero(np.r_[True, flat_sorted[1:] != flat_sorted[:-1]])]
    r, c, d = rows[first], cols[first], depth[first]
    closer = d < buffers.depth[r, c]
    r, c = r[closer], c[closer]
    buffers.depth[r, c] = d[closer]
    buffers.index[r, c] = object_index
    buffers.normals[r, c] = normals[first[closer]]
