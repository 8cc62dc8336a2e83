"""
Pose Error Metrics

Symmetry-aware pose errors (maximum surface distance in 3D, maximum
projection distance in pixels), estimate-to-ground-truth matching and
average recall over strict thresholds or threshold sweeps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core.errors import BehindCameraError, EmptyMeshError, EmptySceneError
from ..core.geometry import Camera, Pose
from ..scene.scene_io import Scene
from .optimizer import SceneEstimate

logger = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = 1
MSSD = "mssd"
MSPD = "mspd"

# Sweep grids: MSSD as a fraction of the diameter, MSPD in px at 640 px width.
MSSD_SWEEP = tuple(np.round(np.arange(0.05, 0.51, 0.05), 2).tolist())
MSPD_SWEEP = tuple(float(t) for t in range(5, 51, 5))


def _vertices(vertices) -> np.ndarray:
    pts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyMeshError("Pose error needs at least one vertex")
    return pts


def mssd(p_hat: Pose, p_bar: Pose, symmetries: Sequence[Pose], vertices) -> float:
    """min over S of max over x of |P_hat x - P_bar S x| (meters)."""
    pts = _vertices(vertices)
    est = pts @ p_hat.rotation.T + p_hat.translation
    errors = []
    for sym in symmetries:
        rotation = p_bar.rotation @ sym.rotation
        translation = p_bar.rotation @ sym.translation + p_bar.translation
        gt = pts @ rotation.T + translation
        errors.append(np.linalg.norm(est - gt, axis=1).max())
    return float(min(errors))


def _project_all(camera: Camera, points_world: np.ndarray) -> np.ndarray:
    pixels, depths = camera.project_points(points_world)
    if np.any(depths <= 0):
        raise BehindCameraError(
            f"{int(np.sum(depths <= 0))} vertices have non-positive depth in the camera"
        )
    return pixels


def mspd(
    p_hat: Pose, p_bar: Pose, symmetries: Sequence[Pose], vertices, camera: Camera
) -> float:
    """min over S of max over x of |proj(P_hat x) - proj(P_bar S x)| (pixels)."""
    pts = _vertices(vertices)
    est = _project_all(camera, pts @ p_hat.rotation.T + p_hat.translation)
    errors = []
    for sym in symmetries:
        rotation = p_bar.rotation @ sym.rotation
        translation = p_bar.rotation @ sym.translation + p_bar.translation
        gt = _project_all(camera, pts @ rotation.T + translation)
        errors.append(np.linalg.norm(est - gt, axis=1).max())
    return float(min(errors))


@dataclass
class PoseError:
    """Errors of one ground-truth instance seen from one view.

    `mssd` is frame-independent and repeats across the views of an instance.
    """

    mssd: float
    mspd: float
    diameter: float
    gt_index: int = 0
    view_index: int = 0
    class_id: Optional[int] = None
    estimate_index: Optional[int] = None
    image_width: int = 640

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gt_index": self.gt_index,
            "view_index": self.view_index,
            "class_id": self.class_id,
            "estimate_index": self.estimate_index,
            "mssd_m": self.mssd,
            "mspd_px": self.mspd,
            "diameter_m": self.diameter,
        }


def _below(error: PoseError, metric: str, threshold: float) -> bool:
    if metric == MSSD:
        return error.mssd < threshold * error.diameter
    if metric == MSPD:
        return error.mspd < threshold
    raise ValueError(f"Unknown metric '{metric}'")


def average_recall(
    errors: Sequence[PoseError], metric: str, thresholds: Union[float, Sequence[float]]
) -> float:
    """Fraction of errors below threshold, averaged over the given thresholds.

    MSSD thresholds are fractions of each object's diameter; MSPD thresholds
    are pixels.
    """
    if not errors:
        raise EmptySceneError("average_recall needs at least one pose error")
    grid = [float(thresholds)] if np.isscalar(thresholds) else [float(t) for t in thresholds]
    recalls = [sum(_below(e, metric, t) for e in errors) / len(errors) for t in grid]
    return float(np.mean(recalls))


def mspd_sweep(image_width: int) -> List[float]:
    return [t * image_width / 640.0 for t in MSPD_SWEEP]


@dataclass
class Match:
    gt_index: int
    estimate_index: Optional[int]
    mssd: float


MISMATCH_COST = 1e9


def match_estimates(estimate: SceneEstimate, scene: Scene) -> List[Match]:
    """Assign estimates to same-class ground truths minimizing the total MSSD.

    Returns one Match per ground-truth instance, in instance order; unmatched
    instances carry estimate_index None and an infinite error.
    """
    n_est, n_gt = len(estimate.objects), len(scene.instances)
    cost = np.full((n_est, n_gt), MISMATCH_COST)
    for e_idx, obj in enumerate(estimate.objects):
        for g_idx, inst in enumerate(scene.instances):
            if obj.class_id is not None and obj.class_id != inst.class_id:
                continue
            cls = scene.classes[inst.class_id]
            cost[e_idx, g_idx] = mssd(obj.pose, inst.pose, cls.symmetries, cls.mesh.vertices)
    assigned: Dict[int, Match] = {}
    if n_est and n_gt:
        rows, cols = linear_sum_assignment(cost)
        for e_idx, g_idx in zip(rows, cols):
            if cost[e_idx, g_idx] < MISMATCH_COST:
                assigned[int(g_idx)] = Match(int(g_idx), int(e_idx), float(cost[e_idx, g_idx]))
    matches = [assigned.get(g, Match(g, None, float("inf"))) for g in range(n_gt)]
    misses = sum(m.estimate_index is None for m in matches)
    if misses:
        logger.warning(f"{misses} ground-truth instance(s) without a matching estimate")
    return matches


@dataclass
class EvaluationReport:
    """Per-(instance, view) errors plus strict and sweep average recalls."""

    errors: List[PoseError]
    theta_mspd_px: float
    theta_mssd_frac: float
    ar: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": REPORT_FORMAT_VERSION,
            "thresholds": {"mspd_px": self.theta_mspd_px, "mssd_frac": self.theta_mssd_frac},
            "average_recall": dict(self.ar),
            "errors": [e.to_dict() for e in self.errors],
        }


def evaluate_scene(
    estimate: SceneEstimate,
    scene: Scene,
    theta_mspd_px: float = 5.0,
    theta_mssd_frac: float = 0.05,
) -> EvaluationReport:
    """Match estimates to ground truth and score them in every camera frame."""
    matches = match_estimates(estimate, scene)
    errors: List[PoseError] = []
    for match in matches:
        inst = scene.instances[match.gt_index]
        cls = scene.classes[inst.class_id]
        for v, camera in enumerate(scene.cameras):
            mssd_v = mspd_v = float("inf")
            if match.estimate_index is not None:
                p_hat = estimate.objects[match.estimate_index].pose
                to_cam = camera.world_to_cam
                # Errors are computed per image, with both poses in the camera frame.
                cam_hat, cam_bar = to_cam @ p_hat, to_cam @ inst.pose
                mssd_v = mssd(cam_hat, cam_bar, cls.symmetries, cls.mesh.vertices)
                try:
                    mspd_v = mspd(p_hat, inst.pose, cls.symmetries, cls.mesh.vertices, camera)
                except BehindCameraError as e:
                    logger.warning(f"Instance {match.gt_index}, view {v}: {e}")
            errors.append(
                PoseError(
                    mssd=mssd_v,
                    mspd=mspd_v,
                    diameter=cls.mesh.diameter,
                    gt_index=match.gt_index,
                    view_index=v,
                    class_id=inst.class_id,
                    estimate_index=match.estimate_index,
                    image_width=camera.width,
                )
            )

    report = EvaluationReport(errors, theta_mspd_px, theta_mssd_frac)
    if errors:
        width = errors[0].image_width
        report.ar = {
            "mssd_strict": average_recall(errors, MSSD, theta_mssd_frac),
            "mspd_strict": average_recall(errors, MSPD, theta_mspd_px),
            "mssd_sweep": average_recall(errors, MSSD, MSSD_SWEEP),
            "mspd_sweep": average_recall(errors, MSPD, mspd_sweep(width)),
        }
    logger.info(f"Evaluated {len(matches)} instances over {len(scene.cameras)} views: {report.ar}")
    return report
