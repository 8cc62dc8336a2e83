"""
Primitive object meshes with their discrete symmetry sets.

All meshes are closed, centered on their bounding-box center and returned
together with the rotations that map them onto themselves (identity first).
"""

from __future__ import annotations

import itertools
import logging
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..core.errors import InvalidDimensionsError
from ..core.geometry import Pose
from ..rendering.mesh import Mesh

logger = logging.getLogger(__name__)

Builder = Callable[[Sequence[float]], Tuple[Mesh, List[Pose]]]

CYLINDER_SEGMENTS = 64

DEFAULT_DIMS: Dict[str, Tuple[float, ...]] = {
    "cube": (0.08,),
    "cuboid": (0.06, 0.1, 0.14),
    "cylinder": (0.035, 0.12),
    "l-bracket": (0.12, 0.08, 0.025, 0.05),
}


def _check_dims(kind: str, dims: Sequence[float], count: int) -> np.ndarray:
    values = np.asarray(dims, dtype=np.float64).reshape(-1)
    if values.size != count:
        raise InvalidDimensionsError(f"{kind} takes {count} dimension(s), got {values.size}")
    if not np.all(values > 0):
        raise InvalidDimensionsError(f"{kind} dimensions must be positive, got {values.tolist()}")
    return values


def _box(extents: np.ndarray, name: str) -> Mesh:
    half = extents / 2.0
    corners = np.array(list(itertools.product((-1.0, 1.0), repeat=3))) * half
    # corner index = 4*ix + 2*iy + iz
    faces = [
        (0, 1, 3), (0, 3, 2),  # x-
        (4, 6, 7), (4, 7, 5),  # x+
        (0, 4, 5), (0, 5, 1),  # y-
        (2, 3, 7), (2, 7, 6),  # y+
        (0, 2, 6), (0, 6, 4),  # z-
        (1, 5, 7), (1, 7, 3),  # z+
    ]
    return Mesh(corners, np.array(faces), name=name)


def _signed_permutations() -> List[np.ndarray]:
    """The 24 proper rotations of the cube, identity first."""
    rotations = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            for row, (col, sign) in enumerate(zip(perm, signs)):
                m[row, col] = sign
            if np.linalg.det(m) > 0:
                rotations.append(m)
    return rotations


def _box_symmetries(extents: np.ndarray) -> List[Pose]:
    symmetries = []
    for m in _signed_permutations():
        if np.array_equal(np.abs(m) @ extents, extents):
            symmetries.append(Pose(m, np.zeros(3)))
    return symmetries


def build_cube(dims: Sequence[float]) -> Tuple[Mesh, List[Pose]]:
    (size,) = _check_dims("cube", dims, 1)
    extents = np.full(3, size)
    return _box(extents, "cube"), _box_symmetries(extents)


def build_cuboid(dims: Sequence[float]) -> Tuple[Mesh, List[Pose]]:
    extents = _check_dims("cuboid", dims, 3)
    return _box(extents, "cuboid"), _box_symmetries(extents)


def build_cylinder(
    dims: Sequence[float], segments: int = CYLINDER_SEGMENTS
) -> Tuple[Mesh, List[Pose]]:
    """Closed cylinder along z; symmetries are `segments` axial steps times a flip."""
    radius, height = _check_dims("cylinder", dims, 2)
    if segments < 3:
        raise InvalidDimensionsError(f"cylinder needs at least 3 segments, got {segments}")
    angles = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    bottom = np.hstack([ring, np.full((segments, 1), -height / 2)])
    top = np.hstack([ring, np.full((segments, 1), height / 2)])
    vertices = np.vstack([bottom, top, [[0.0, 0.0, -height / 2], [0.0, 0.0, height / 2]]])
    c_bottom, c_top = 2 * segments, 2 * segments + 1
    triangles = []
    for k in range(segments):
        n = (k + 1) % segments
        triangles += [
            (k, n, segments + n),
            (k, segments + n, segments + k),
            (c_bottom, n, k),
            (c_top, segments + k, segments + n),
        ]
    flip = np.diag([1.0, -1.0, -1.0])
    symmetries = []
    for f in (np.eye(3), flip):
        for k in range(segments):
            axial = Rotation.from_rotvec([0.0, 0.0, 2.0 * np.pi * k / segments]).as_matrix()
            symmetries.append(Pose(axial @ f, np.zeros(3)))
    return Mesh(vertices, np.array(triangles), name="cylinder"), symmetries


def build_l_bracket(dims: Sequence[float]) -> Tuple[Mesh, List[Pose]]:
    """L profile in the x-z plane extruded along y; no proper symmetry."""
    length, height, thickness, depth = _check_dims("l-bracket", dims, 4)
    if thickness >= min(length, height):
        raise InvalidDimensionsError(
            f"l-bracket thickness {thickness} must be below both arms ({length}, {height})"
        )
    profile = np.array(
        [
            [0.0, 0.0],
            [length, 0.0],
            [length, thickness],
            [thickness, thickness],
            [thickness, height],
            [0.0, height],
        ]
    )
    profile -= [length / 2.0, height / 2.0]
    n = len(profile)
    front = np.column_stack([profile[:, 0], np.full(n, -depth / 2), profile[:, 1]])
    back = np.column_stack([profile[:, 0], np.full(n, depth / 2), profile[:, 1]])
    vertices = np.vstack([front, back])
    # Profile vertex 0 is the outer corner and sees every other vertex.
    triangles = []
    for k in range(1, n - 1):
        triangles.append((0, k, k + 1))
        triangles.append((n, n + k + 1, n + k))
    for k in range(n):
        m = (k + 1) % n
        triangles += [(k, m, n + m), (k, n + m, n + k)]
    return Mesh(vertices, np.array(triangles), name="l-bracket"), [Pose.identity()]


class PrimitiveFactory:
    """
    Registry of primitive mesh builders keyed by kind name.

    Builders take a dimension sequence and return (Mesh, symmetry list).
    """

    _builders: Dict[str, Builder] = {
        "cube": build_cube,
        "cuboid": build_cuboid,
        "cylinder": build_cylinder,
        "l-bracket": build_l_bracket,
    }

    @classmethod
    def create(cls, kind: str, dims: Sequence[float] = ()) -> Tuple[Mesh, List[Pose]]:
        """
        Build a primitive.

        Args:
            kind: registered primitive name
            dims: dimensions in meters; empty selects the kind's defaults

        Raises:
            InvalidDimensionsError: unknown kind or non-positive dimensions
        """
        kind = kind.lower()
        if kind not in cls._builders:
            raise InvalidDimensionsError(f"Unsupported primitive kind: {kind}")
        values = tuple(dims) if len(dims) else DEFAULT_DIMS.get(kind, ())
        return cls._builders[kind](values)

    @classmethod
    def supported_kinds(cls) -> List[str]:
        return list(cls._builders.keys())

    @classmethod
    def register_kind(cls, name: str, builder: Builder) -> None:
        if not callable(builder):
            raise ValueError(f"Builder for '{name}' must be callable")
        cls._builders[name.lower()] = builder
        logger.info(f"Registered primitive kind: {name}")


def primitive_mesh(kind: str, dims: Sequence[float] = ()) -> Tuple[Mesh, List[Pose]]:
    return PrimitiveFactory.create(kind, dims)
