"""
Heatmap directory layout.

    <dir>/index.json                       version, view count, class ids
    <dir>/center_c<class>_v<view>.raw      float32 center map
    <dir>/curvature_v<view>.raw            float32 curvature target
    (optional) matching .png + .json previews for each grid
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

from ..core.errors import MalformedFileError
from ..scene.scene_io import check_version, read_json_document
from ..services.heatmaps import CENTER, CURVATURE, Heatmap, OracleHeatmaps
from .grid_codec import read_raw_grid, write_png16, write_raw_grid
from .reports import write_json

logger = logging.getLogger(__name__)

HEATMAP_SET_VERSION = 1
INDEX_NAME = "index.json"


def center_name(class_id: int, view_index: int) -> str:
    return f"center_c{class_id:03d}_v{view_index:02d}"


def curvature_name(view_index: int) -> str:
    return f"curvature_v{view_index:02d}"


def write_heatmap_set(
    directory: Path,
    heatmaps: OracleHeatmaps,
    previews: bool = True,
    metadata: Optional[Dict[str, Any]] = None,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for class_id, maps in sorted(heatmaps.centers.items()):
        for heatmap in maps:
            name = center_name(class_id, heatmap.view_index)
            write_raw_grid(directory / f"{name}.raw", heatmap.grid)
            if previews:
                # Center maps are bounded by 1.
                write_png16(
                    directory / f"{name}.png", heatmap.grid, CENTER, heatmap.view_index, 65535.0
                )
    for heatmap in heatmaps.curvature:
        name = curvature_name(heatmap.view_index)
        write_raw_grid(directory / f"{name}.raw", heatmap.grid)
        if previews:
            write_png16(directory / f"{name}.png", heatmap.grid, CURVATURE, heatmap.view_index)
    index = {
        "version": HEATMAP_SET_VERSION,
        "n_views": heatmaps.n_views,
        "class_ids": sorted(heatmaps.centers),
        "metadata": dict(metadata or {}),
    }
    write_json(directory / INDEX_NAME, index)
    logger.info(
        f"Wrote heatmaps for {heatmaps.n_views} views and {len(heatmaps.centers)} classes "
        f"to {directory}"
    )


def read_heatmap_set(directory: Path) -> OracleHeatmaps:
    """Load the raw grids listed by a heatmap directory's index."""
    directory = Path(directory)
    index_path = directory / INDEX_NAME
    index = read_json_document(index_path)
    check_version(index, HEATMAP_SET_VERSION, index_path)
    try:
        n_views = int(index["n_views"])
        class_ids = [int(c) for c in index["class_ids"]]
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedFileError(f"Invalid heatmap index {index_path}: {e}")
    oracle = OracleHeatmaps()
    for class_id in class_ids:
        oracle.centers[class_id] = [
            Heatmap(
                read_raw_grid(directory / f"{center_name(class_id, v)}.raw"),
                view_index=v,
                kind=CENTER,
                class_id=class_id,
            )
            for v in range(n_views)
        ]
    oracle.curvature = [
        Heatmap(read_raw_grid(directory / f"{curvature_name(v)}.raw"), v, CURVATURE)
        for v in range(n_views)
    ]
    return oracle
