"""
Render-and-Compare Cost

Target curvature maps are binarized with threshold t_b and turned into exact
Euclidean distance maps once per scene. A candidate's cost in one view is the
curvature-weighted mean distance of its rendered curvature pixels; views are
combined with non-negative weights.

Already placed objects are rendered once per view together with their cost
sums; a candidate is then rasterized only inside its own screen window and
the sums are patched there.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from ..core.config import CostConfig
from ..core.errors import ShapeMismatchError
from ..core.geometry import Camera, Pose
from ..rendering.curvature import RenderedViews, curvature_from_normals
from ..rendering.mesh import Mesh
from ..rendering.rasterizer import ViewBuffers, rasterize, screen_window
from .heatmaps import Heatmap

logger = logging.getLogger(__name__)

# A candidate is the list of (mesh, pose) pairs rendered on top of the placed objects.
PoseSet = Sequence[Tuple[Mesh, Pose]]


@dataclass
class DistanceMap:
    """Per-pixel distance (px) to the nearest target pixel with value >= t_b."""

    grid: np.ndarray
    t_b: float
    view_index: int = 0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.grid.shape  # type: ignore[return-value]


def distance_transform(target: Union[Heatmap, np.ndarray], t_b: float) -> DistanceMap:
    """Exact Euclidean distance transform of the binarized target.

    An image without any true pixel maps to its diagonal length everywhere.
    """
    grid = target.grid if isinstance(target, Heatmap) else np.asarray(target, dtype=np.float64)
    view_index = target.view_index if isinstance(target, Heatmap) else 0
    binary = grid >= t_b
    if not binary.any():
        h, w = grid.shape
        logger.warning(f"View {view_index}: target has no pixel >= t_b={t_b}")
        return DistanceMap(np.full(grid.shape, float(np.hypot(h, w))), t_b, view_index)
    distances = ndimage.distance_transform_edt(~binary)
    return DistanceMap(np.asarray(distances, dtype=np.float64), t_b, view_index)


def empty_penalty(shape: Tuple[int, int], penalty: Optional[float]) -> float:
    """Cost of a view with nothing rendered: the penalty, or the image diagonal."""
    if penalty is None:
        return float(np.hypot(*shape))
    return float(penalty)


def view_cost(render: np.ndarray, distances: DistanceMap, penalty: Optional[float]) -> float:
    """sum(render * dist) / sum(render), or the empty-render penalty."""
    if render.shape != distances.shape:
        raise ShapeMismatchError(
            f"Render shape {render.shape} does not match distance map {distances.shape}"
        )
    total = float(np.sum(render))
    if total == 0.0:
        return empty_penalty(render.shape, penalty)
    return float(np.sum(render * distances.grid)) / total


def resolve_weights(
    n_views: int, config: CostConfig, view_weights: Optional[Sequence[float]] = None
) -> np.ndarray:
    """Explicit weights win over config weights; both fall back to uniform."""
    weights = view_weights if view_weights is not None else config.view_weights
    if weights is None:
        return np.ones(n_views)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n_views,):
        raise ShapeMismatchError(f"Expected {n_views} view weights, got {weights.shape}")
    if np.any(weights < 0) or not np.any(weights > 0):
        raise ValueError(f"View weights must be >= 0 with one > 0, got {weights.tolist()}")
    return weights


def scene_cost(
    renders: Union[RenderedViews, Sequence[np.ndarray]],
    distance_maps: Sequence[DistanceMap],
    config: CostConfig,
    view_weights: Optional[Sequence[float]] = None,
) -> float:
    """Weighted mean of per-view costs of a rendered candidate."""
    maps = renders.curvature_maps if isinstance(renders, RenderedViews) else list(renders)
    if len(maps) != len(distance_maps):
        raise ShapeMismatchError(f"Got {len(maps)} renders for {len(distance_maps)} distance maps")
    weights = resolve_weights(len(maps), config, view_weights)
    total = 0.0
    for v in range(len(maps)):
        if weights[v] > 0:
            total += weights[v] * view_cost(maps[v], distance_maps[v], config.empty_render_penalty)
    return total / float(np.sum(weights))


@dataclass
class SceneContext:
    """Fixed inputs shared by every cost evaluation of one scene."""

    cameras: List[Camera]
    distance_maps: List[DistanceMap]
    config: CostConfig = field(default_factory=CostConfig)

    def __post_init__(self) -> None:
        if len(self.cameras) != len(self.distance_maps):
            raise ShapeMismatchError(
                f"Got {len(self.cameras)} cameras for {len(self.distance_maps)} distance maps"
            )
        for camera, dmap in zip(self.cameras, self.distance_maps):
            if camera.shape != dmap.shape:
                raise ShapeMismatchError(
                    f"Camera image {camera.shape} does not match distance map {dmap.shape}"
                )

    @classmethod
    def from_targets(
        cls, cameras: Sequence[Camera], targets: Sequence[Heatmap], config: CostConfig
    ) -> "SceneContext":
        maps = [distance_transform(t, config.t_b) for t in targets]
        return cls(list(cameras), maps, config)


@dataclass
class PlacedView:
    """One view of the already placed objects with its image-wide cost sums.

    `curvature_sum` is sum(C) and `weighted_sum` is sum(C * dist) over the
    curvature map C of the placed objects alone.
    """

    buffers: ViewBuffers
    curvature: np.ndarray
    curvature_sum: float
    weighted_sum: float
    covered: bool

    @classmethod
    def build(cls, buffers: ViewBuffers, distances: DistanceMap) -> "PlacedView":
        curvature = curvature_from_normals(buffers.normals, buffers.coverage)
        return cls(
            buffers,
            curvature,
            float(np.sum(curvature)),
            float(np.sum(curvature * distances.grid)),
            bool(buffers.coverage.any()),
        )

    @property
    def next_index(self) -> int:
        return max(int(self.buffers.index.max()) + 1, 0)


def prepare_bases(
    context: SceneContext, bases: Optional[Sequence[Union[ViewBuffers, PlacedView]]] = None
) -> List[PlacedView]:
    """Per-view placed-object state; `bases=None` means nothing is placed yet."""
    if bases is not None and len(bases) != len(context.cameras):
        raise ShapeMismatchError(
            f"Got {len(bases)} base buffers for {len(context.cameras)} cameras"
        )
    views = []
    for v, (camera, dmap) in enumerate(zip(context.cameras, context.distance_maps)):
        base = bases[v] if bases is not None else None
        if isinstance(base, PlacedView):
            views.append(base)
            continue
        buffers = base if base is not None else ViewBuffers.empty(camera.shape)
        views.append(PlacedView.build(buffers, dmap))
    return views


def placed_view_cost(
    meshes: Sequence[Mesh],
    poses: Sequence[Pose],
    camera: Camera,
    placed: PlacedView,
    distances: DistanceMap,
    penalty: Optional[float],
) -> float:
    """view_cost of the posed meshes composited over the placed objects.

    Only the meshes' screen window is rendered again. The gradient filter
    reaches one pixel, so curvature can change up to one pixel outside the
    window and needs normals up to two pixels outside it.
    """
    total, weighted, covered = placed.curvature_sum, placed.weighted_sum, placed.covered
    window = screen_window(meshes, poses, camera)
    if window is not None:
        outer = window.grow(2, camera.shape)
        inner = window.grow(1, camera.shape)
        buffers = rasterize(
            meshes, poses, camera, base=placed.buffers, first_index=placed.next_index, window=outer
        )
        curvature = curvature_from_normals(buffers.normals, buffers.coverage)
        fresh = curvature[inner.relative_to(outer)]
        stale = placed.curvature[inner.slices]
        dist = distances.grid[inner.slices]
        total = total - float(np.sum(stale)) + float(np.sum(fresh))
        weighted = weighted - float(np.sum(stale * dist)) + float(np.sum(fresh * dist))
        covered = covered or bool(buffers.coverage.any())
    if not covered or total <= 0.0:
        return empty_penalty(camera.shape, penalty)
    return weighted / total


def candidate_cost(
    candidate: PoseSet,
    context: SceneContext,
    weights: np.ndarray,
    bases: Optional[Sequence[Union[ViewBuffers, PlacedView]]] = None,
) -> float:
    """Render one candidate over the placed objects and score it.

    Views with zero weight are skipped entirely.
    """
    meshes = [m for m, _ in candidate]
    poses = [p for _, p in candidate]
    placed = prepare_bases(context, bases)
    total = 0.0
    for v, camera in enumerate(context.cameras):
        if weights[v] <= 0:
            continue
        total += weights[v] * placed_view_cost(
            meshes,
            poses,
            camera,
            placed[v],
            context.distance_maps[v],
            context.config.empty_render_penalty,
        )
    return total / float(np.sum(weights))


# Process workers receive the shared context once through the pool initializer.
_WORKER_STATE: Dict[str, object] = {}


def _init_worker(context: SceneContext, weights: np.ndarray, bases) -> None:
    _WORKER_STATE["args"] = (context, weights, bases)


def _worker_cost(candidate: PoseSet) -> float:
    context, weights, bases = _WORKER_STATE["args"]  # type: ignore[misc]
    return candidate_cost(candidate, context, weights, bases)


def batch_cost(
    candidates: Sequence[PoseSet],
    context: SceneContext,
    view_weights: Optional[Sequence[float]] = None,
    bases: Optional[Sequence[Union[ViewBuffers, PlacedView]]] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Cost of every candidate, in input order.

    Each value depends only on its own candidate, so results do not change
    with batch composition, order or worker count.
    """
    weights = resolve_weights(len(context.cameras), context.config, view_weights)
    bases = prepare_bases(context, bases)
    n = len(candidates)
    costs = np.empty(n)
    workers = min(workers or context.config.workers, max(n, 1))
    if workers <= 1:
        for i, candidate in enumerate(candidates):
            costs[i] = candidate_cost(candidate, context, weights, bases)
    elif context.config.backend == "process":
        chunksize = max(1, n // (4 * workers))
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(context, weights, bases)
        ) as pool:
            for i, value in enumerate(pool.map(_worker_cost, candidates, chunksize=chunksize)):
                costs[i] = value
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(candidate_cost, c, context, weights, bases): i
                for i, c in enumerate(candidates)
            }
            for future in as_completed(futures):
                costs[futures[future]] = future.result()
    logger.debug(f"Evaluated {n} candidates with {workers} worker(s)")
    return costs


@dataclass
class BenchmarkResult:
    workers: int
    evaluations: int
    seconds: float
    costs: np.ndarray

    @property
    def evaluations_per_second(self) -> float:
        return self.evaluations / self.seconds if self.seconds > 0 else float("inf")


def benchmark_cost(
    context: SceneContext,
    candidates: Sequence[PoseSet],
    workers: int = 1,
    bases: Optional[Sequence[Union[ViewBuffers, PlacedView]]] = None,
) -> BenchmarkResult:
    """Time one batched evaluation of the candidates."""
    start = time.perf_counter()
    costs = batch_cost(candidates, context, bases=bases, workers=workers)
    elapsed = time.perf_counter() - start
    result = BenchmarkResult(workers, len(candidates), elapsed, costs)
    logger.info(
        f"bench: {result.evaluations} evaluations with {workers} worker(s) in {elapsed:.3f}s "
        f"({result.evaluations_per_second:.1f}/s)"
    )
    return result
