"""
Triangle meshes and their ASCII file formats (PLY, OBJ).

Only triangle faces are supported; vertices are in meters in the object frame.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from ..core.errors import InvalidDimensionsError, MalformedFileError, MissingMeshFileError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    Attributes
    ----------
    vertices: (N, 3) float64 vertex positions.
    triangles: (M, 3) int64 vertex indices.
    name: free-form label (file stem or primitive kind).
    diameter: max pairwise vertex distance (derived).
    bbox_extents: axis-aligned bounding box size (derived).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    name: str = ""
    diameter: float = field(init=False)
    bbox_extents: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(vertices) < 2:
            raise InvalidDimensionsError(f"Mesh '{self.name}' needs at least 2 vertices")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MalformedFileError(
                f"Mesh '{self.name}' has triangle indices outside [0, {len(vertices)})"
            )
        diameter = float(pdist(vertices).max())
        extents = vertices.max(axis=0) - vertices.min(axis=0)
        if not diameter > 0:
            raise InvalidDimensionsError(f"Mesh '{self.name}' has zero diameter")
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        extents.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)
        object.__setattr__(self, "diameter", diameter)
        object.__setattr__(self, "bbox_extents", extents)

    @property
    def mean_extent(self) -> float:
        return float(np.mean(self.bbox_extents))

    def same_geometry(self, other: "Mesh") -> bool:
        return bool(
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
        )


# -------------------- Readers --------------------


def load_mesh(path: Path) -> Mesh:
    """Load an ASCII PLY or OBJ mesh, dispatching on the file suffix."""
    path = Path(path)
    if not path.exists():
        raise MissingMeshFileError(f"Mesh file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".ply":
        vertices, triangles = _parse_ply(path.read_text(), path)
    elif suffix == ".obj":
        vertices, triangles = _parse_obj(path.read_text(), path)
    else:
        raise MalformedFileError(f"Unsupported mesh format '{suffix}': {path}")
    logger.debug(f"Loaded mesh {path} ({len(vertices)} vertices, {len(triangles)} triangles)")
    return Mesh(np.asarray(vertices), np.asarray(triangles), name=path.stem)


def _parse_ply(text: str, path: Path) -> Tuple[List[List[float]], List[List[int]]]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MalformedFileError(f"Not a PLY file: {path}")
    n_vertices = n_faces = 0
    vertex_props: List[str] = []
    current = None
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format" and parts[1] != "ascii":
            raise MalformedFileError(f"Only ASCII PLY is supported ({parts[1]}): {path}")
        if parts[0] == "element":
            current = parts[1]
            if current == "vertex":
                n_vertices = int(parts[2])
            elif current == "face":
                n_faces = int(parts[2])
        elif parts[0] == "property" and current == "vertex":
            vertex_props.append(parts[-1])
        elif parts[0] == "end_header":
            body_start = i + 1
            break
    if body_start is None:
        raise MalformedFileError(f"PLY header has no end_header: {path}")
    try:
        ix, iy, iz = (vertex_props.index(k) for k in ("x", "y", "z"))
    except ValueError:
        raise MalformedFileError(f"PLY vertices lack x/y/z properties: {path}")

    body = [ln.split() for ln in lines[body_start:] if ln.strip()]
    if len(body) < n_vertices + n_faces:
        raise MalformedFileError(f"PLY body is truncated: {path}")
    try:
        vertices = [[float(r[ix]), float(r[iy]), float(r[iz])] for r in body[:n_vertices]]
        triangles = []
        for row in body[n_vertices : n_vertices + n_faces]:
            if int(row[0]) != 3:
                raise MalformedFileError(f"Only triangle faces are supported: {path}")
            triangles.append([int(row[1]), int(row[2]), int(row[3])])
    except MalformedFileError:
        raise
    except (ValueError, IndexError) as e:
        raise MalformedFileError(f"Bad PLY body in {path}: {e}")
    return vertices, triangles


def _parse_obj(text: str, path: Path) -> Tuple[List[List[float]], List[List[int]]]:
    vertices: List[List[float]] = []
    triangles: List[List[int]] = []
    try:
        for line in text.splitlines():
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise MalformedFileError(f"Only triangle faces are supported: {path}")
                face = []
                for token in parts[1:]:
                    idx = int(token.split("/")[0])
                    face.append(idx - 1 if idx > 0 else len(vertices) + idx)
                triangles.append(face)
    except MalformedFileError:
        raise
    except (ValueError, IndexError) as e:
        raise MalformedFileError(f"Bad OBJ line in {path}: {e}")
    return vertices, triangles


# -------------------- Writers --------------------


def save_mesh_ply(mesh: Mesh, path: Path) -> None:
    """Write an ASCII PLY; coordinates use 17 significant digits (exact round-trip)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(mesh.triangles)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    out.extend(" ".join(format(float(c), ".17g") for c in v) for v in mesh.vertices)
    out.extend("3 " + " ".join(str(int(i)) for i in tri) for tri in mesh.triangles)
    path.write_text("\n".join(out) + "\n")
