"""
Grid codecs: raw float32 grids and 16-bit PNG exports.

Raw layout: 8-byte magic, uint32 rows, uint32 cols (16-byte header), then
rows*cols little-endian float32 values in row-major order.

PNG exports quantize to uint16 as q = round((value - offset) * scale); the
JSON sidecar next to the PNG records scale, offset, kind and view index so
values can be recovered as q / scale + offset.
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import cv2
import numpy as np

from ..core.errors import MalformedFileError
from .binary_reader import BinaryReader

logger = logging.getLogger(__name__)

RAW_MAGIC = b"CPGRID01"
PNG_SIDECAR_VERSION = 1
UINT16_MAX = 65535


def write_raw_grid(path: Path, grid: np.ndarray) -> None:
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError(f"Raw grids must be 2D, got shape {grid.shape}")
    rows, cols = grid.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(grid, dtype="<f4").tobytes()
    path.write_bytes(RAW_MAGIC + struct.pack("<II", rows, cols) + payload)


def read_raw_grid(path: Path) -> np.ndarray:
    """Read a raw float32 grid; truncated or foreign files raise MalformedFileError."""
    path = Path(path)
    reader = BinaryReader(path.read_bytes())
    try:
        magic = reader.read_bytes(len(RAW_MAGIC))
        if magic != RAW_MAGIC:
            raise MalformedFileError(f"Bad raw grid magic {magic!r} in {path}")
        rows = reader.read_uint32()
        cols = reader.read_uint32()
        values = reader.read_float32_array(rows * cols)
    except EOFError as e:
        raise MalformedFileError(f"Truncated raw grid {path}: {e}")
    if not reader.is_at_end():
        raise MalformedFileError(f"Trailing bytes after raw grid data in {path}")
    return values.reshape(rows, cols)


def _sidecar_path(png_path: Path) -> Path:
    return png_path.with_suffix(".json")


def write_png16(
    path: Path,
    grid: np.ndarray,
    kind: str,
    view_index: int = 0,
    scale: Optional[float] = None,
    offset: float = 0.0,
) -> Dict[str, Any]:
    """Write a 1- or 3-channel grid as 16-bit PNG plus JSON sidecar.

    Non-finite values (e.g. empty depth) are stored as 0. Without an explicit
    scale, the largest finite value maps to 65535. Three-channel grids are
    stored so that channel 0 appears as red.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(grid, dtype=np.float64)
    finite = np.isfinite(values)
    shifted = np.where(finite, values - offset, 0.0)
    if scale is None:
        peak = float(shifted.max()) if shifted.size else 0.0
        scale = UINT16_MAX / peak if peak > 0 else 1.0
    quantized = np.clip(np.round(shifted * scale), 0, UINT16_MAX).astype(np.uint16)
    if quantized.ndim == 3:
        quantized = np.ascontiguousarray(quantized[:, :, ::-1])
    if not cv2.imwrite(str(path), quantized):
        raise OSError(f"Failed to write PNG {path}")
    sidecar = {
        "version": PNG_SIDECAR_VERSION,
        "kind": kind,
        "view_index": int(view_index),
        "scale": float(scale),
        "offset": float(offset),
        "channels": 1 if values.ndim == 2 else int(values.shape[2]),
        "channel_order": "rgb" if values.ndim == 3 else "gray",
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2) + "\n")
    return sidecar


def read_png16(path: Path) -> Tuple[np.ndarray, Dict[str, Any]]:
    """Decode a PNG written by write_png16 using its sidecar."""
    path = Path(path)
    sidecar_path = _sidecar_path(path)
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as e:
        raise MalformedFileError(f"Malformed PNG sidecar {sidecar_path}: {e}")
    image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if image is None or image.dtype != np.uint16:
        raise MalformedFileError(f"Not a 16-bit PNG: {path}")
    if image.ndim == 3:
        image = image[:, :, ::-1]
    values = image.astype(np.float64) / sidecar["scale"] + sidecar["offset"]
    return values, sidecar


def write_normals_png(path: Path, normals: np.ndarray, view_index: int = 0) -> Dict[str, Any]:
    """Unit normals in [-1, 1] are mapped linearly onto the full uint16 range."""
    return write_png16(
        path, normals, "normals", view_index, scale=UINT16_MAX / 2.0, offset=-1.0
    )
