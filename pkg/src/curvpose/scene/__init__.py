"""
Scene package: primitive meshes, synthetic generation and scene files.
"""

from .generator import CameraRing, SceneGenerationSpec, generate_scene
from .primitives import PrimitiveFactory, primitive_mesh
from .scene_io import Instance, ObjectClass, Scene, load_scene, save_scene

__all__ = [
    "CameraRing",
    "Instance",
    "ObjectClass",
    "PrimitiveFactory",
    "Scene",
    "SceneGenerationSpec",
    "generate_scene",
    "load_scene",
    "primitive_mesh",
    "save_scene",
]
