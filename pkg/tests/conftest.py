import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure both `src.curvpose` and `curvpose` are importable when running tests directly
PROJECT_ROOT = Path(__file__).resolve().parents[1]
for path in (PROJECT_ROOT, PROJECT_ROOT / "src"):
    if str(path) not in sys.path:
        sys.path.insert(0, str(path))

from src.curvpose.core.geometry import Camera, Pose  # noqa: E402
from src.curvpose.rendering.mesh import Mesh  # noqa: E402
from src.curvpose.scene.generator import (  # noqa: E402
    CameraRing,
    SceneGenerationSpec,
    generate_scene,
)


def pytest_collection_modifyitems(config, items):
    """Skip long-running acceptance experiments unless explicitly requested."""
    if os.getenv("CURVPOSE_ACCEPTANCE", "0") == "1":
        return
    skip = pytest.mark.skip(reason="set CURVPOSE_ACCEPTANCE=1 to run acceptance experiments")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def camera_factory():
    """Build cameras at the world origin looking down +z (identity extrinsics)."""

    def make(width=64, height=64, focal=100.0, cx=None, cy=None, world_to_cam=None):
        return Camera(
            fx=focal,
            fy=focal,
            cx=width / 2.0 if cx is None else cx,
            cy=height / 2.0 if cy is None else cy,
            width=width,
            height=height,
            world_to_cam=world_to_cam or Pose.identity(),
        )

    return make


@pytest.fixture
def axis_camera(camera_factory) -> Camera:
    return camera_factory()


@pytest.fixture
def square_mesh() -> Mesh:
    """0.2 m square in the z = 0 plane of its own frame."""
    vertices = np.array(
        [[-0.1, -0.1, 0.0], [0.1, -0.1, 0.0], [0.1, 0.1, 0.0], [-0.1, 0.1, 0.0]]
    )
    return Mesh(vertices, np.array([[0, 1, 2], [0, 2, 3]]), name="square")


@pytest.fixture
def small_spec() -> SceneGenerationSpec:
    """Two cuboids seen by four small cameras; cheap enough for unit tests."""
    return SceneGenerationSpec(
        n_objects=2,
        class_mix=[{"kind": "cuboid"}],
        camera_ring=CameraRing(n_views=4, width=96, image_height=80, focal=120.0),
    )


@pytest.fixture
def small_scene(small_spec):
    return generate_scene(small_spec, seed=3)
