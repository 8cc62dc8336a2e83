"""
Center Triangulation Service

Turns per-view center heatmaps into 3D object centers: peaks become rays,
cross-view ray pairs with a small gap yield midpoints, nearby midpoints are
merged, each merged point is refined by maximizing its reprojected heatmap
score, centers with too little multi-view support are dropped, and
overlapping centers are pruned by score.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import pdist, squareform

from ..core.config import HeatmapConfig, TriangulationConfig
from ..core.errors import InsufficientViewsError, ParallelRaysError
from ..core.geometry import Camera, pixel_ray, ray_pair_midpoint
from .heatmaps import Heatmap, Peak, detect_peaks
from .simplex import SimplexOptions, nelder_mead

logger = logging.getLogger(__name__)


@dataclass
class Center3D:
    """Triangulated object center with its per-view heatmap support.

    Attributes
    ----------
    position: world coordinates in meters.
    per_view_scores: bilinear heatmap value at the reprojection, per view.
    aggregate_score: sum of per_view_scores.
    class_id: object class whose heatmaps produced the center.
    """

    position: np.ndarray
    per_view_scores: np.ndarray
    aggregate_score: float
    class_id: Optional[int] = None

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.per_view_scores = np.asarray(self.per_view_scores, dtype=np.float64)

    @classmethod
    def from_scores(
        cls, position, scores: np.ndarray, class_id: Optional[int] = None
    ) -> "Center3D":
        scores = np.clip(np.asarray(scores, dtype=np.float64), 0.0, 1.0)
        return cls(position, scores, float(np.sum(scores)), class_id)

    @property
    def view_weights(self) -> np.ndarray:
        """Per-view scores renormalized to sum 1 (uniform if all are zero)."""
        total = float(np.sum(self.per_view_scores))
        if total <= 0:
            return np.full(len(self.per_view_scores), 1.0 / max(len(self.per_view_scores), 1))
        return self.per_view_scores / total

    def to_dict(self) -> Dict[str, Any]:
        return {
            "position_m": [float(v) for v in self.position],
            "per_view_scores": [float(s) for s in self.per_view_scores],
            "aggregate_score": float(self.aggregate_score),
            "class_id": self.class_id,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Center3D":
        return cls(
            np.asarray(data["position_m"], dtype=np.float64),
            np.asarray(data["per_view_scores"], dtype=np.float64),
            float(data["aggregate_score"]),
            data.get("class_id"),
        )


def _peak_pixel(peak: Union[Peak, Sequence[float]]) -> np.ndarray:
    return peak.pixel if isinstance(peak, Peak) else np.asarray(peak, dtype=np.float64)


def triangulate_candidates(
    peaks_per_view: Sequence[Sequence[Union[Peak, Sequence[float]]]],
    cameras: Sequence[Camera],
    config: TriangulationConfig,
) -> List[np.ndarray]:
    """Midpoints of all cross-view peak-ray pairs whose gap is below d_t."""
    if len(cameras) < 2 or len(peaks_per_view) < 2:
        raise InsufficientViewsError(
            f"Triangulation needs at least 2 views, got {min(len(cameras), len(peaks_per_view))}"
        )
    if len(peaks_per_view) != len(cameras):
        raise ValueError(f"Got peaks for {len(peaks_per_view)} views but {len(cameras)} cameras")

    rays = [
        [pixel_ray(cam, _peak_pixel(p)) for p in peaks]
        for cam, peaks in zip(cameras, peaks_per_view)
    ]
    midpoints: List[np.ndarray] = []
    parallel = 0
    for a, b in combinations(range(len(cameras)), 2):
        for ray_a in rays[a]:
            for ray_b in rays[b]:
                try:
                    midpoint, gap = ray_pair_midpoint(ray_a, ray_b)
                except ParallelRaysError:
                    parallel += 1
                    continue
                if gap < config.d_t:
                    midpoints.append(midpoint)
    if parallel:
        logger.warning(f"Skipped {parallel} parallel ray pairs")
    logger.debug(f"Triangulated {len(midpoints)} candidate midpoints")
    return midpoints


def merge_candidates(points: Sequence[np.ndarray], d_c: float) -> List[np.ndarray]:
    """Greedy closest-pair agglomeration of points closer than d_c.

    Each merged cluster is represented by the centroid of all its members.
    Output: descending cluster size, then lexicographic position.
    """
    clusters = [(np.asarray(p, dtype=np.float64).copy(), 1) for p in points]
    while len(clusters) > 1:
        centroids = np.array([s / n for s, n in clusters])
        dist = squareform(pdist(centroids))
        np.fill_diagonal(dist, np.inf)
        i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
        if not dist[i, j] < d_c:
            break
        i, j = min(i, j), max(i, j)
        merged = (clusters[i][0] + clusters[j][0], clusters[i][1] + clusters[j][1])
        clusters[i] = merged
        del clusters[j]
    ordered = sorted(clusters, key=lambda c: (-c[1], *(c[0] / c[1]).tolist()))
    return [s / n for s, n in ordered]


def reprojection_scores(
    point: np.ndarray, heatmaps: Sequence[Heatmap], cameras: Sequence[Camera]
) -> np.ndarray:
    """Bilinear heatmap value at the projection of `point` in every view.

    Projections behind the camera or outside the image contribute 0.
    """
    scores = np.zeros(len(cameras))
    for v, (heatmap, camera) in enumerate(zip(heatmaps, cameras)):
        pixels, depths = camera.project_points(point[None, :])
        if depths[0] <= 0:
            continue
        u, vv = pixels[0]
        # Grid node (i, j) sits at pixel center (j + 0.5, i + 0.5).
        coords = np.array([[vv - 0.5], [u - 0.5]])
        scores[v] = float(
            ndimage.map_coordinates(heatmap.grid, coords, order=1, mode="constant", cval=0.0)[0]
        )
    return np.clip(scores, 0.0, None)


def refine_and_score(
    points: Sequence[np.ndarray],
    heatmaps_per_view: Sequence[Heatmap],
    cameras: Sequence[Camera],
    config: Optional[TriangulationConfig] = None,
    class_id: Optional[int] = None,
) -> List[Center3D]:
    """Maximize the summed reprojection score of each point inside a d_c box."""
    config = config or TriangulationConfig()
    options = SimplexOptions(
        max_iters=config.refine_max_iters,
        xtol=config.refine_xtol,
        ftol=config.refine_ftol,
        initial_step=0.25 * config.d_c,
    )
    centers = []
    for point in points:
        x0 = np.asarray(point, dtype=np.float64)
        initial = reprojection_scores(x0, heatmaps_per_view, cameras)
        if not initial.sum() > 0:
            centers.append(Center3D.from_scores(x0, initial, class_id))
            continue
        result = nelder_mead(
            lambda x: -float(np.sum(reprojection_scores(x, heatmaps_per_view, cameras))),
            x0,
            bounds=(x0 - config.d_c, x0 + config.d_c),
            options=options,
        )
        refined = reprojection_scores(result.x, heatmaps_per_view, cameras)
        centers.append(Center3D.from_scores(result.x, refined, class_id))
        logger.debug(f"Refined center score {initial.sum():.4f} -> {refined.sum():.4f}")
    return centers


def drop_unsupported(
    centers: Sequence[Center3D], config: TriangulationConfig
) -> List[Center3D]:
    """Remove centers that too few views agree on.

    Two rays from different objects can cross within d_t; such a point scores
    high in the two views that produced it and near zero elsewhere.
    """
    if not centers:
        return []
    best = max(c.aggregate_score for c in centers)
    kept = []
    for center in centers:
        needed = min(config.min_support_views, len(center.per_view_scores))
        support = int(np.sum(center.per_view_scores >= config.support_score))
        if support < needed or center.aggregate_score < config.min_score_fraction * best:
            logger.debug(
                f"Dropping center at {np.round(center.position, 4).tolist()}: "
                f"{support} supporting views, score {center.aggregate_score:.3f}"
            )
            continue
        kept.append(center)
    return kept


def prune(centers: Sequence[Center3D], config: TriangulationConfig) -> List[Center3D]:
    """Drop centers within d_o of a higher-scoring one; keep at most expected_count."""
    ordered = sorted(centers, key=lambda c: -c.aggregate_score)
    kept: List[Center3D] = []
    for center in ordered:
        if all(np.linalg.norm(center.position - k.position) >= config.d_o for k in kept):
            kept.append(center)
    if config.expected_count is not None:
        kept = kept[: int(config.expected_count)]
    return kept


def centers_from_heatmaps(
    heatmaps_per_view: Sequence[Heatmap],
    cameras: Sequence[Camera],
    heatmap_config: HeatmapConfig,
    config: TriangulationConfig,
    class_id: Optional[int] = None,
) -> List[Center3D]:
    """Full heatmaps-to-centers chain for one object class."""
    peaks = [detect_peaks(h, heatmap_config) for h in heatmaps_per_view]
    logger.info(f"Class {class_id}: peaks per view {[len(p) for p in peaks]}")
    candidates = triangulate_candidates(peaks, cameras, config)
    merged = merge_candidates(candidates, config.d_c)
    refined = refine_and_score(merged, heatmaps_per_view, cameras, config, class_id=class_id)
    centers = prune(drop_unsupported(refined, config), config)
    logger.info(f"Class {class_id}: {len(candidates)} midpoints -> {len(centers)} centers")
    return centers
