"""
Curvature maps from view-space normals.

Each normal channel is filtered with the horizontal and vertical 3x3 Prewitt
kernels (normalized by 1/6); the curvature of a pixel is the 2-norm of the
resulting 6-component gradient. Uncovered pixels hold the zero vector, so
silhouettes produce a response.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage

from ..core.geometry import Camera, Pose
from .mesh import Mesh
from .rasterizer import ViewBuffers, rasterize

logger = logging.getLogger(__name__)

PREWITT_NORMALIZATION = 1.0 / 6.0


def curvature_from_normals(
    normals: np.ndarray, coverage: Optional[np.ndarray] = None
) -> np.ndarray:
    """Prewitt gradient magnitude of an (H, W, 3) normal map.

    Args:
        normals: view-space normals
        coverage: optional (H, W) mask; normals outside it are treated as zero

    Returns:
        (H, W) non-negative curvature map.
    """
    normals = np.asarray(normals, dtype=np.float64)
    if coverage is None:
        coverage = np.any(normals != 0.0, axis=2)
    h, w = coverage.shape
    curvature = np.zeros((h, w))
    rows, cols = np.nonzero(coverage)
    if rows.size == 0:
        return curvature

    # Gradients vanish more than one pixel away from covered pixels.
    r0, r1 = max(rows.min() - 2, 0), min(rows.max() + 3, h)
    c0, c1 = max(cols.min() - 2, 0), min(cols.max() + 3, w)
    crop = np.where(coverage[r0:r1, c0:c1, None], normals[r0:r1, c0:c1], 0.0)

    squared = np.zeros((r1 - r0, c1 - c0))
    for channel in range(3):
        plane = crop[:, :, channel]
        for axis in (0, 1):
            grad = ndimage.prewitt(plane, axis=axis, mode="constant", cval=0.0)
            squared += (grad * PREWITT_NORMALIZATION) ** 2
    curvature[r0:r1, c0:c1] = np.sqrt(squared)
    return curvature


@dataclass
class ViewRender:
    """Rasterized buffers of one view plus the derived curvature map."""

    buffers: ViewBuffers
    curvature: np.ndarray

    @property
    def depth(self) -> np.ndarray:
        return self.buffers.depth

    @property
    def index(self) -> np.ndarray:
        return self.buffers.index

    @property
    def normals(self) -> np.ndarray:
        return self.buffers.normals


@dataclass
class RenderedViews:
    """Per-camera render results, in camera order."""

    views: List[ViewRender]

    def __len__(self) -> int:
        return len(self.views)

    def __getitem__(self, i: int) -> ViewRender:
        return self.views[i]

    @property
    def curvature_maps(self) -> List[np.ndarray]:
        return [v.curvature for v in self.views]


def render_view(
    meshes: Sequence[Mesh],
    poses: Sequence[Pose],
    camera: Camera,
    base: Optional[ViewBuffers] = None,
    first_index: int = 0,
) -> ViewRender:
    buffers = rasterize(meshes, poses, camera, base=base, first_index=first_index)
    return ViewRender(buffers, curvature_from_normals(buffers.normals, buffers.coverage))


def render_curvature(
    meshes: Sequence[Mesh],
    poses: Sequence[Pose],
    cameras: Sequence[Camera],
    bases: Optional[Sequence[ViewBuffers]] = None,
) -> RenderedViews:
    """Rasterize the posed meshes in every camera and derive curvature maps.

    `bases` optionally supplies per-view buffers of already-placed objects;
    the new meshes are composited over them with the z-buffer and numbered
    after the objects already present.
    """
    if bases is not None and len(bases) != len(cameras):
        raise ValueError(f"Got {len(bases)} base buffers for {len(cameras)} cameras")
    views = []
    for v, camera in enumerate(cameras):
        base = bases[v] if bases is not None else None
        first = int(base.index.max()) + 1 if base is not None else 0
        views.append(render_view(meshes, poses, camera, base=base, first_index=max(first, 0)))
    return RenderedViews(views)
