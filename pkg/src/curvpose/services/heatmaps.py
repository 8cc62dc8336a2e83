"""
Heatmap Service

Synthesizes ground-truth center and curvature heatmaps from known scenes and
detects 2D peaks in center heatmaps. The synthesized maps stand in for the
output of a learned predictor; `corrupt` adds Gaussian noise to emulate its
imperfection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from ..core.config import HeatmapConfig
from ..core.errors import InvalidHeatmapError
from ..core.geometry import Camera, Pose
from ..rendering.curvature import render_view
from ..rendering.mesh import Mesh
from ..rendering.rasterizer import rasterize
from ..scene.scene_io import Scene

logger = logging.getLogger(__name__)

CENTER = "center"
CURVATURE = "curvature"


@dataclass
class Heatmap:
    """Single-channel grid of non-negative scores for one view.

    Attributes
    ----------
    grid: (H, W) float64 values; center maps are bounded by 1.
    view_index: index of the camera the map belongs to.
    kind: "center" or "curvature".
    class_id: object class of a center map (None when class-agnostic).
    """

    grid: np.ndarray
    view_index: int = 0
    kind: str = CENTER
    class_id: Optional[int] = None

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.ndim != 2:
            raise InvalidHeatmapError(f"Heatmap grid must be 2D, got shape {grid.shape}")
        if self.kind not in (CENTER, CURVATURE):
            raise InvalidHeatmapError(f"Unknown heatmap kind '{self.kind}'")
        if grid.size and not (np.all(np.isfinite(grid)) and grid.min() >= 0.0):
            raise InvalidHeatmapError(f"Heatmap for view {self.view_index} has negative values")
        if self.kind == CENTER and grid.size and grid.max() > 1.0:
            raise InvalidHeatmapError(f"Center heatmap for view {self.view_index} exceeds 1")
        self.grid = grid

    @property
    def shape(self):
        return self.grid.shape

    def with_grid(self, grid: np.ndarray) -> "Heatmap":
        return Heatmap(grid, self.view_index, self.kind, self.class_id)


@dataclass(frozen=True)
class Peak:
    """Local maximum of a center heatmap; `pixel` is the (u, v) pixel center."""

    row: int
    col: int
    score: float

    @property
    def pixel(self) -> np.ndarray:
        return np.array([self.col + 0.5, self.row + 0.5])


# -------------------- Center heatmaps --------------------


def blob_sigma(mean_extent: float, distance: float, sigma_scale: float) -> float:
    """Gaussian std in pixels: s_e * (mean bbox extent * 100) / distance to camera."""
    return sigma_scale * (mean_extent * 100.0) / distance


def center_heatmap(
    centers_world: Sequence[np.ndarray],
    mesh_per_center: Sequence[Mesh],
    camera: Camera,
    config: HeatmapConfig,
    view_index: int = 0,
    class_id: Optional[int] = None,
) -> Heatmap:
    """Splat a Gaussian blob at the projection of every center.

    Blobs combine by per-pixel maximum. Centers with non-positive camera depth
    are skipped.
    """
    if len(centers_world) != len(mesh_per_center):
        raise ValueError(f"Got {len(centers_world)} centers but {len(mesh_per_center)} meshes")
    h, w = camera.shape
    grid = np.zeros((h, w))
    for k, (center, mesh) in enumerate(zip(centers_world, mesh_per_center)):
        center = np.asarray(center, dtype=np.float64)
        pixels, depths = camera.project_points(center[None, :])
        if depths[0] <= 0:
            logger.warning(f"View {view_index}: center {k} is behind the camera, skipped")
            continue
        u, v = pixels[0]
        distance = float(np.linalg.norm(center - camera.center))
        sigma = blob_sigma(mesh.mean_extent, distance, config.sigma_scale)
        _splat(grid, u, v, sigma, config.splat_truncation)
    np.clip(grid, 0.0, 1.0, out=grid)
    return Heatmap(grid, view_index, CENTER, class_id)


def _splat(grid: np.ndarray, u: float, v: float, sigma: float, truncation: float) -> None:
    h, w = grid.shape
    radius = truncation * sigma
    j0, j1 = max(int(np.floor(u - radius)), 0), min(int(np.ceil(u + radius)), w - 1)
    i0, i1 = max(int(np.floor(v - radius)), 0), min(int(np.ceil(v + radius)), h - 1)
    if j0 > j1 or i0 > i1:
        return
    dx = np.arange(j0, j1 + 1) + 0.5 - u
    dy = np.arange(i0, i1 + 1) + 0.5 - v
    d2 = dy[:, None] ** 2 + dx[None, :] ** 2
    blob = np.where(d2 <= radius * radius, np.exp(-d2 / (2.0 * sigma * sigma)), 0.0)
    region = grid[i0 : i1 + 1, j0 : j1 + 1]
    np.maximum(region, blob, out=region)


def visibility_fractions(
    meshes: Sequence[Mesh], poses: Sequence[Pose], camera: Camera
) -> np.ndarray:
    """Visible share of each object's own footprint in the full-scene render."""
    if not meshes:
        return np.zeros(0)
    full = rasterize(meshes, poses, camera)
    fractions = np.zeros(len(meshes))
    for k, (mesh, pose) in enumerate(zip(meshes, poses)):
        alone = int(rasterize([mesh], [pose], camera).coverage.sum())
        if alone > 0:
            fractions[k] = float((full.index == k).sum()) / alone
    return fractions


def center_heatmaps_by_class(
    scene: Scene, camera: Camera, config: HeatmapConfig, view_index: int = 0
) -> Dict[int, Heatmap]:
    """One center heatmap per object class present in the scene."""
    keep = np.ones(len(scene.instances), dtype=bool)
    if config.visibility_threshold > 0:
        fractions = visibility_fractions(scene.meshes, scene.poses, camera)
        keep = fractions > config.visibility_threshold
        logger.debug(f"View {view_index}: visibility {np.round(fractions, 3).tolist()}")
    maps: Dict[int, Heatmap] = {}
    for cid in scene.class_ids_present():
        members = [k for k in scene.instances_of(cid) if keep[k]]
        maps[cid] = center_heatmap(
            [scene.instances[k].pose.translation for k in members],
            [scene.classes[cid].mesh for _ in members],
            camera,
            config,
            view_index=view_index,
            class_id=cid,
        )
    return maps


# -------------------- Curvature targets --------------------


def curvature_target(
    meshes: Sequence[Mesh],
    poses: Sequence[Pose],
    camera: Camera,
    view_index: int = 0,
    visible_only: bool = False,
    visibility_threshold: float = 0.0,
) -> Heatmap:
    """Ground-truth curvature map of a scene in one view.

    With `visible_only`, curvature is kept only on pixels covered by (or one
    pixel away from) objects whose visible fraction exceeds the threshold.
    """
    render = render_view(meshes, poses, camera)
    grid = render.curvature
    if visible_only and len(meshes):
        fractions = visibility_fractions(meshes, poses, camera)
        visible_ids = np.flatnonzero(fractions > visibility_threshold)
        mask = np.isin(render.index, visible_ids)
        mask = ndimage.binary_dilation(mask, structure=np.ones((3, 3), dtype=bool))
        grid = np.where(mask, grid, 0.0)
    return Heatmap(grid, view_index, CURVATURE)


# -------------------- Corruption --------------------


def corrupt(
    heatmap: Heatmap, noise_sigma: float, rng: Union[int, np.random.Generator] = 0
) -> Heatmap:
    """Add zero-mean Gaussian noise and clamp to the valid range.

    `rng` is a seed or a shared Generator; noise_sigma == 0 returns an
    unchanged copy without consuming random draws.
    """
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if noise_sigma == 0:
        return heatmap.with_grid(heatmap.grid.copy())
    generator = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    noisy = heatmap.grid + generator.normal(0.0, noise_sigma, size=heatmap.grid.shape)
    upper = 1.0 if heatmap.kind == CENTER else np.inf
    return heatmap.with_grid(np.clip(noisy, 0.0, upper))


# -------------------- Peak detection --------------------


def detect_peaks(heatmap: Heatmap, config: HeatmapConfig) -> List[Peak]:
    """Local maxima within a (2r+1)^2 window that reach `peak_threshold`.

    Among equal values inside one window the lexicographically smallest
    (row, col) wins. Output is sorted by descending score, then (row, col).
    """
    grid = heatmap.grid
    r = config.peak_min_distance
    size = 2 * r + 1
    local_max = ndimage.maximum_filter(grid, size=size, mode="constant", cval=-np.inf)
    candidates = np.argwhere((grid == local_max) & (grid >= config.peak_threshold))
    h, w = grid.shape
    peaks = []
    for row, col in candidates:
        value = grid[row, col]
        r0, c0 = max(row - r, 0), max(col - r, 0)
        window = grid[r0 : min(row + r + 1, h), c0 : min(col + r + 1, w)]
        first = np.argwhere(window == value)[0]
        if (first[0] + r0, first[1] + c0) != (row, col):
            continue
        peaks.append(Peak(int(row), int(col), float(value)))
    peaks.sort(key=lambda p: (-p.score, p.row, p.col))
    logger.debug(f"View {heatmap.view_index}: {len(peaks)} peaks")
    return peaks


# -------------------- Oracle bundle --------------------


@dataclass
class OracleHeatmaps:
    """Per-view heatmaps synthesized from a ground-truth scene.

    `centers[class_id][v]` is the center map of that class in view v;
    `curvature[v]` is the curvature target of view v.
    """

    centers: Dict[int, List[Heatmap]] = field(default_factory=dict)
    curvature: List[Heatmap] = field(default_factory=list)

    @property
    def n_views(self) -> int:
        return len(self.curvature)


def synthesize_oracle(
    scene: Scene,
    config: HeatmapConfig,
    seed: int = 0,
    visible_only: bool = False,
) -> OracleHeatmaps:
    """Center and curvature heatmaps for every view of a scene.

    Noise (config.noise_sigma) is applied to center maps only, drawing from a
    single generator seeded once, in view order then ascending class id.
    """
    rng = np.random.default_rng(seed)
    oracle = OracleHeatmaps()
    for cid in scene.class_ids_present():
        oracle.centers[cid] = []
    for v, camera in enumerate(scene.cameras):
        by_class = center_heatmaps_by_class(scene, camera, config, view_index=v)
        for cid in sorted(by_class):
            oracle.centers[cid].append(corrupt(by_class[cid], config.noise_sigma, rng))
        oracle.curvature.append(
            curvature_target(
                scene.meshes,
                scene.poses,
                camera,
                view_index=v,
                visible_only=visible_only,
                visibility_threshold=config.visibility_threshold,
            )
        )
    logger.info(
        f"Synthesized oracle heatmaps: {len(scene.cameras)} views, {len(oracle.centers)} classes"
    )
    return oracle
