"""
Synthetic scene generation.

Objects drawn from a class mix are placed by rejection sampling inside an
axis-aligned region with a minimum center spacing and random orientations;
cameras sit on a ring around the region centroid, looking at it.

Random draw order (single generator seeded once): for each object, the class
choice, then candidate positions until one is accepted, then the rotation.
When an object cannot be placed, the whole layout starts over from the first
object, continuing the same random stream.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..core.config import dataclass_from_dict
from ..core.errors import ConfigError, PlacementFailedError
from ..core.geometry import Camera, Pose, look_at
from .primitives import PrimitiveFactory
from .scene_io import Instance, ObjectClass, Scene

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 2_000
MAX_LAYOUT_RESTARTS = 25


@dataclass
class CameraRing:
    """Cameras evenly spaced on a horizontal circle around the region centroid."""

    n_views: int = 6
    radius: float = 0.8
    height: float = 0.6
    width: int = 320
    image_height: int = 256
    focal: float = 400.0

    def __post_init__(self) -> None:
        if int(self.n_views) < 2:
            raise ConfigError(f"Camera ring needs n_views >= 2, got {self.n_views}")
        if not (self.radius > 0 and self.focal > 0):
            raise ConfigError("Camera ring radius and focal length must be positive")
        self.n_views = int(self.n_views)

    def cameras(self, target: np.ndarray) -> List[Camera]:
        target = np.asarray(target, dtype=np.float64)
        cameras = []
        for k in range(self.n_views):
            angle = 2.0 * np.pi * k / self.n_views
            eye = target + np.array(
                [self.radius * np.cos(angle), self.radius * np.sin(angle), self.height]
            )
            cameras.append(
                Camera(
                    fx=self.focal,
                    fy=self.focal,
                    cx=self.width / 2.0,
                    cy=self.image_height / 2.0,
                    width=self.width,
                    height=self.image_height,
                    world_to_cam=look_at(eye, target),
                )
            )
        return cameras


@dataclass
class SceneGenerationSpec:
    """What to generate.

    `class_mix` entries are {"kind": str, "dims": [...], "weight": float};
    class ids are positions in this list. The defaults describe the
    reference scene: three cuboids viewed by six 256x320 cameras.
    """

    n_objects: int = 3
    class_mix: List[Dict[str, Any]] = field(default_factory=lambda: [{"kind": "cuboid"}])
    region_center: Tuple[float, float, float] = (0.0, 0.0, 0.1)
    region_half_extents: Tuple[float, float, float] = (0.22, 0.22, 0.05)
    min_spacing: float = 0.18
    camera_ring: CameraRing = field(default_factory=CameraRing)

    def __post_init__(self) -> None:
        if int(self.n_objects) < 0:
            raise ConfigError(f"n_objects must be >= 0, got {self.n_objects}")
        self.n_objects = int(self.n_objects)
        if not self.min_spacing > 0:
            raise ConfigError(f"min_spacing must be > 0, got {self.min_spacing}")
        if not self.class_mix:
            raise ConfigError("class_mix must list at least one object class")
        if any(h < 0 for h in self.region_half_extents):
            raise ConfigError(f"region_half_extents must be >= 0, got {self.region_half_extents}")
        if isinstance(self.camera_ring, dict):
            self.camera_ring = dataclass_from_dict(CameraRing, self.camera_ring)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "SceneGenerationSpec":
        return dataclass_from_dict(cls, data)

    def class_weights(self) -> np.ndarray:
        weights = np.array([float(c.get("weight", 1.0)) for c in self.class_mix])
        if np.any(weights < 0) or not weights.sum() > 0:
            raise ConfigError(f"class weights must be >= 0 with a positive sum, got {weights}")
        return weights / weights.sum()


def build_classes(spec: SceneGenerationSpec) -> Dict[int, ObjectClass]:
    classes = {}
    for cid, entry in enumerate(spec.class_mix):
        if "kind" not in entry:
            raise ConfigError(f"class_mix entry {cid} has no 'kind'")
        mesh, symmetries = PrimitiveFactory.create(entry["kind"], entry.get("dims", ()))
        classes[cid] = ObjectClass(mesh, symmetries, name=entry["kind"])
    return classes


def _layout(
    spec: SceneGenerationSpec, weights: np.ndarray, rng: np.random.Generator
) -> Optional[List[Instance]]:
    """One placement pass; None when some object found no free spot."""
    center = np.asarray(spec.region_center, dtype=np.float64)
    half = np.asarray(spec.region_half_extents, dtype=np.float64)
    instances: List[Instance] = []
    positions: List[np.ndarray] = []
    for k in range(spec.n_objects):
        class_id = int(rng.choice(len(weights), p=weights))
        for _attempt in range(MAX_PLACEMENT_ATTEMPTS):
            candidate = center + rng.uniform(-1.0, 1.0, size=3) * half
            if all(np.linalg.norm(candidate - p) >= spec.min_spacing for p in positions):
                break
        else:
            logger.debug(f"No free spot for object {k} after {MAX_PLACEMENT_ATTEMPTS} attempts")
            return None
        rotation = Rotation.random(1, rng).as_matrix()[0]
        positions.append(candidate)
        instances.append(Instance(class_id, Pose(rotation, candidate)))
    return instances


def generate_scene(spec: SceneGenerationSpec, seed: int = 0) -> Scene:
    """Deterministic synthetic scene for a spec and seed."""
    rng = np.random.default_rng(seed)
    classes = build_classes(spec)
    weights = spec.class_weights()

    for restart in range(MAX_LAYOUT_RESTARTS):
        instances = _layout(spec, weights, rng)
        if instances is not None:
            break
        logger.info(f"Restarting layout (seed {seed}, restart {restart + 1})")
    else:
        raise PlacementFailedError(
            f"Could not place {spec.n_objects} objects with min spacing {spec.min_spacing} m "
            f"in {MAX_LAYOUT_RESTARTS} layouts"
        )

    cameras = spec.camera_ring.cameras(np.asarray(spec.region_center, dtype=np.float64))
    logger.info(
        f"Generated scene (seed {seed}): {len(instances)} objects, {len(cameras)} cameras"
    )
    return Scene(classes=classes, instances=instances, cameras=cameras)
