"""
Serialization: raw and PNG grid codecs, JSON/CSV reports.
"""

from .grid_codec import read_png16, read_raw_grid, write_normals_png, write_png16, write_raw_grid
from .heatmap_store import read_heatmap_set, write_heatmap_set
from .reports import (
    read_centers,
    read_estimate,
    read_report,
    write_centers,
    write_estimate,
    write_report,
    write_trace,
)

__all__ = [
    "read_png16",
    "read_raw_grid",
    "write_normals_png",
    "write_png16",
    "write_raw_grid",
    "read_centers",
    "read_estimate",
    "read_report",
    "write_centers",
    "write_estimate",
    "write_report",
    "write_trace",
    "read_heatmap_set",
    "write_heatmap_set",
]
