"""
Pose Optimizer

Sequential render-and-compare pose search. Objects are processed in order of
decreasing center score; for each, uniformly random rotations and normally
distributed translations around the 3D center are scored in a batch, and the
best few candidates are refined with the bounded simplex. Already placed
objects are rendered as occluders for every later candidate.

Pose parameters are a 6-vector: translation offset from the anchor center
(meters) followed by an axis-angle rotation (radians).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..core.config import OptimizerConfig
from ..core.errors import EmptySceneError
from ..core.geometry import Pose
from ..rendering.mesh import Mesh
from ..rendering.rasterizer import ViewBuffers, rasterize
from ..scene.scene_io import ObjectClass
from .centers import Center3D
from .costfn import SceneContext, batch_cost, candidate_cost, prepare_bases, resolve_weights
from .simplex import SimplexOptions, nelder_mead

logger = logging.getLogger(__name__)

ESTIMATE_FORMAT_VERSION = 1


# -------------------- Parameterization --------------------


def params_to_pose(
    params: Sequence[float], anchor: np.ndarray, reference: Optional[np.ndarray] = None
) -> Pose:
    """Pose with R = exp(rotvec) [* reference] and t = anchor + offset."""
    params = np.asarray(params, dtype=np.float64)
    rotation = Rotation.from_rotvec(params[3:]).as_matrix()
    if reference is not None:
        rotation = rotation @ reference
    return Pose(rotation, np.asarray(anchor, dtype=np.float64) + params[:3])


def sample_candidates(
    center: Center3D,
    config: OptimizerConfig,
    rng: np.random.Generator,
    diameter: float = 1.0,
) -> np.ndarray:
    """(n_candidates, 6) pose parameters around the center.

    Draw order: all rotations (uniform unit quaternions), then all translation
    offsets ~ N(0, sigma^2) per axis, clamped to +-bound.
    """
    n = config.n_candidates
    rotvecs = Rotation.random(n, rng).as_rotvec().reshape(n, 3)
    sigma = config.sigma_for(diameter)
    bound = config.bound_for(diameter)
    offsets = np.clip(rng.normal(0.0, sigma, size=(n, 3)), -bound, bound)
    return np.hstack([offsets, rotvecs])


# -------------------- Estimates --------------------


@dataclass
class ObjectEstimate:
    object_id: int
    class_id: Optional[int]
    pose: Pose
    cost: float
    per_view_scores: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "object_id": self.object_id,
            "class_id": self.class_id,
            "rotation": [float(v) for v in self.pose.rotation.reshape(-1)],
            "translation_m": [float(v) for v in self.pose.translation],
            "cost": float(self.cost),
            "per_view_scores": [float(s) for s in self.per_view_scores],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ObjectEstimate":
        return cls(
            object_id=int(data["object_id"]),
            class_id=data.get("class_id"),
            pose=Pose(np.asarray(data["rotation"], dtype=np.float64), data["translation_m"]),
            cost=float(data["cost"]),
            per_view_scores=np.asarray(data.get("per_view_scores", []), dtype=np.float64),
        )


@dataclass
class SceneEstimate:
    """Objects in placement order (descending aggregate center score)."""

    objects: List[ObjectEstimate] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.objects)

    def to_dict(self) -> Dict[str, Any]:
        return {"version": ESTIMATE_FORMAT_VERSION, "objects": [o.to_dict() for o in self.objects]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SceneEstimate":
        return cls([ObjectEstimate.from_dict(o) for o in data.get("objects", [])])


@dataclass
class ConvergenceTrace:
    """Best cost per (object rank, stage, iteration)."""

    rows: List[Tuple[int, str, int, float]] = field(default_factory=list)

    def add(self, rank: int, stage: str, iteration: int, best_cost: float) -> None:
        self.rows.append((rank, stage, iteration, float(best_cost)))


@dataclass
class ObjectResult:
    pose: Pose
    cost: float
    best_candidate_cost: float


# -------------------- Search --------------------


def placed_buffers(
    placed: Sequence[Tuple[Mesh, Pose]], context: SceneContext
) -> List[ViewBuffers]:
    """Per-view z-buffers holding every already placed object."""
    meshes = [m for m, _ in placed]
    poses = [p for _, p in placed]
    return [rasterize(meshes, poses, camera) for camera in context.cameras]


def optimize_object(
    center: Center3D,
    mesh: Mesh,
    placed: Sequence[Tuple[Mesh, Pose]],
    context: SceneContext,
    config: OptimizerConfig,
    rng: Optional[np.random.Generator] = None,
    extra_candidates: Sequence[Pose] = (),
    trace: Optional[ConvergenceTrace] = None,
    rank: int = 0,
) -> ObjectResult:
    """Best pose of one object given the objects placed before it.

    Candidates are scored jointly with the placed objects, weighting views by
    the center's renormalized per-view scores. The n_refine best candidates
    seed simplex runs over a chart re-centered on their rotation.
    """
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
    bases = prepare_bases(context, placed_buffers(placed, context))
    weights = resolve_weights(len(context.cameras), context.config, center.view_weights)

    params = sample_candidates(center, config, rng, mesh.diameter)
    poses = [params_to_pose(p, center.position) for p in params]
    poses.extend(extra_candidates)
    costs = batch_cost([[(mesh, pose)] for pose in poses], context, weights, bases)
    order = np.argsort(costs, kind="stable")
    best_candidate_cost = float(costs[order[0]])
    if trace is not None:
        trace.add(rank, "candidates", 0, best_candidate_cost)
    logger.debug(
        f"Object rank {rank}: best of {len(poses)} candidates costs {best_candidate_cost:.4f}"
    )

    bound = config.bound_for(mesh.diameter)
    lower = np.array([-bound] * 3 + [-np.pi] * 3)
    upper = np.array([bound] * 3 + [np.pi] * 3)
    step = config.simplex_translation_step * mesh.diameter
    options = SimplexOptions(
        max_iters=config.simplex_max_iters,
        xtol=config.simplex_xtol,
        ftol=config.simplex_ftol,
        initial_step=np.array([step] * 3 + [config.simplex_rotation_step] * 3),
    )

    best_pose, best_cost = poses[order[0]], best_candidate_cost
    for k, idx in enumerate(order[: config.n_refine]):
        start = poses[idx]
        reference = start.rotation
        offset = np.clip(start.translation - center.position, -bound, bound)
        x0 = np.concatenate([offset, np.zeros(3)])

        def objective(x: np.ndarray) -> float:
            pose = params_to_pose(x, center.position, reference)
            return candidate_cost([(mesh, pose)], context, weights, bases)

        result = nelder_mead(objective, x0, bounds=(lower, upper), options=options)
        if trace is not None:
            for it, value in enumerate(result.trace):
                trace.add(rank, f"simplex-{k}", it, value)
        if result.value < best_cost:
            best_pose = params_to_pose(result.x, center.position, reference)
            best_cost = result.value
    logger.debug(f"Object rank {rank}: refined cost {best_cost:.4f}")
    return ObjectResult(best_pose, best_cost, best_candidate_cost)


def optimize_scene(
    centers: Sequence[Center3D],
    classes: Dict[int, ObjectClass],
    context: SceneContext,
    config: OptimizerConfig,
    trace: Optional[ConvergenceTrace] = None,
) -> SceneEstimate:
    """Optimize all objects sequentially in order of decreasing center score.

    One generator seeded with `config.rng_seed` drives all sampling, object by
    object in optimization order.
    """
    if not centers:
        raise EmptySceneError("Pose optimization needs at least one center")
    rng = np.random.default_rng(config.rng_seed)
    order = sorted(range(len(centers)), key=lambda i: -centers[i].aggregate_score)
    default_class = min(classes) if classes else None
    placed: List[Tuple[Mesh, Pose]] = []
    estimate = SceneEstimate()
    for rank, i in enumerate(order):
        center = centers[i]
        class_id = center.class_id if center.class_id is not None else default_class
        mesh = classes[class_id].mesh
        result = optimize_object(center, mesh, placed, context, config, rng, trace=trace, rank=rank)
        placed.append((mesh, result.pose))
        estimate.objects.append(
            ObjectEstimate(i, class_id, result.pose, result.cost, center.per_view_scores.copy())
        )
        logger.info(
            f"Placed object {i} (class {class_id}, rank {rank}) with cost {result.cost:.4f}"
        )
    return estimate
