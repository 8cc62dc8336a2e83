"""
Scene model and the versioned scene JSON format.

A scene file references one ASCII PLY per object class (stored next to the
JSON) and lists symmetry transforms, instances and cameras inline. Floats are
written with `repr`, which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np

from ..core.errors import (
    MalformedFileError,
    MissingMeshFileError,
    SceneValidationError,
    UnknownVersionError,
)
from ..core.geometry import Camera, Pose
from ..rendering.mesh import Mesh, load_mesh, save_mesh_ply

logger = logging.getLogger(__name__)

SCENE_FORMAT_VERSION = 1


@dataclass
class ObjectClass:
    """An object model: mesh plus its discrete symmetry set (identity first)."""

    mesh: Mesh
    symmetries: List[Pose] = field(default_factory=lambda: [Pose.identity()])
    name: str = ""

    def __post_init__(self) -> None:
        if not any(s.allclose(Pose.identity(), atol=1e-12) for s in self.symmetries):
            self.symmetries = [Pose.identity()] + list(self.symmetries)


@dataclass
class Instance:
    class_id: int
    pose: Pose


@dataclass
class Scene:
    """Object-class table, placed instances and calibrated cameras."""

    classes: Dict[int, ObjectClass]
    instances: List[Instance]
    cameras: List[Camera]

    def __post_init__(self) -> None:
        for k, inst in enumerate(self.instances):
            if inst.class_id not in self.classes:
                raise SceneValidationError(
                    f"Instance {k} references unknown class id {inst.class_id}"
                )

    @property
    def meshes(self) -> List[Mesh]:
        """Mesh of every instance, in instance order."""
        return [self.classes[i.class_id].mesh for i in self.instances]

    @property
    def poses(self) -> List[Pose]:
        return [i.pose for i in self.instances]

    def instances_of(self, class_id: int) -> List[int]:
        return [k for k, inst in enumerate(self.instances) if inst.class_id == class_id]

    def class_ids_present(self) -> List[int]:
        return sorted({inst.class_id for inst in self.instances})


# -------------------- Encoding --------------------


def _floats(values: Sequence[float]) -> List[float]:
    return [float(v) for v in values]


def _pose_to_json(pose: Pose) -> Dict[str, Any]:
    return {
        "rotation": _floats(pose.rotation.reshape(-1)),
        "translation": _floats(pose.translation),
    }


def scene_to_dict(scene: Scene, mesh_paths: Dict[int, str]) -> Dict[str, Any]:
    return {
        "version": SCENE_FORMAT_VERSION,
        "meshes": [
            {
                "class_id": cid,
                "name": cls.name,
                "path": mesh_paths[cid],
                "symmetries": [_pose_to_json(s) for s in cls.symmetries],
            }
            for cid, cls in sorted(scene.classes.items())
        ],
        "instances": [
            {"class_id": inst.class_id, **_pose_to_json(inst.pose)} for inst in scene.instances
        ],
        "cameras": [cam.to_dict() for cam in scene.cameras],
    }


def save_scene(scene: Scene, path: Path) -> None:
    """Write `scene.json`-style document plus one PLY per class beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mesh_paths: Dict[int, str] = {}
    for cid, cls in scene.classes.items():
        rel = f"meshes/class_{cid:03d}.ply"
        save_mesh_ply(cls.mesh, path.parent / rel)
        mesh_paths[cid] = rel
    document = scene_to_dict(scene, mesh_paths)
    path.write_text(json.dumps(document, indent=2) + "\n")
    logger.info(
        f"Saved scene with {len(scene.instances)} instances and "
        f"{len(scene.cameras)} cameras to {path}"
    )


# -------------------- Decoding --------------------


def read_json_document(path: Path) -> Dict[str, Any]:
    """Read a versioned JSON document, mapping decode errors to MalformedFileError."""
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise MalformedFileError(f"Malformed JSON in {path}: {e}")
    if not isinstance(document, dict):
        raise MalformedFileError(f"Expected a JSON object at the top of {path}")
    return document


def check_version(document: Dict[str, Any], expected: int, path: Path) -> None:
    version = document.get("version")
    if version != expected:
        raise UnknownVersionError(f"Unsupported format version {version!r} in {path}")


def _pose_from_json(data: Dict[str, Any], where: str) -> Pose:
    try:
        return Pose(np.asarray(data["rotation"], dtype=np.float64), data["translation"])
    except (KeyError, TypeError, ValueError) as e:
        raise SceneValidationError(f"Invalid pose in {where}: {e}")


def load_scene(path: Path) -> Scene:
    """Load a scene document and its referenced meshes."""
    path = Path(path)
    document = read_json_document(path)
    check_version(document, SCENE_FORMAT_VERSION, path)
    try:
        mesh_entries = document["meshes"]
        instance_entries = document["instances"]
        camera_entries = document["cameras"]
    except KeyError as e:
        raise MalformedFileError(f"Scene file {path} lacks section {e}")

    classes: Dict[int, ObjectClass] = {}
    for entry in mesh_entries:
        try:
            cid = int(entry["class_id"])
            mesh_path = path.parent / entry["path"]
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedFileError(f"Bad mesh entry in {path}: {e!r}")
        if not mesh_path.exists():
            raise MissingMeshFileError(f"Mesh for class {cid} not found: {mesh_path}")
        symmetries = [
            _pose_from_json(s, f"symmetries of class {cid}") for s in entry.get("symmetries", [])
        ]
        classes[cid] = ObjectClass(
            mesh=load_mesh(mesh_path),
            symmetries=symmetries or [Pose.identity()],
            name=str(entry.get("name", "")),
        )

    instances = []
    for k, entry in enumerate(instance_entries):
        try:
            cid = int(entry["class_id"])
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedFileError(f"Bad instance {k} in {path}: {e!r}")
        if cid not in classes:
            raise SceneValidationError(f"Instance {k} references unknown class id {cid}")
        instances.append(Instance(cid, _pose_from_json(entry, f"instance {k}")))

    try:
        cameras = [Camera.from_dict(c) for c in camera_entries]
    except (KeyError, TypeError, ValueError) as e:
        raise SceneValidationError(f"Invalid camera in {path}: {e}")

    logger.debug(f"Loaded scene {path}: {len(classes)} classes, {len(instances)} instances")
    return Scene(classes=classes, instances=instances, cameras=cameras)


def scenes_equal(a: Scene, b: Scene) -> bool:
    """Exact equality of geometry, symmetries, instances and cameras."""
    if sorted(a.classes) != sorted(b.classes) or len(a.instances) != len(b.instances):
        return False
    for cid, cls in a.classes.items():
        other = b.classes[cid]
        if not cls.mesh.same_geometry(other.mesh) or cls.symmetries != other.symmetries:
            return False
    for x, y in zip(a.instances, b.instances):
        if x.class_id != y.class_id or x.pose != y.pose:
            return False
    return [c.to_dict() for c in a.cameras] == [c.to_dict() for c in b.cameras]

