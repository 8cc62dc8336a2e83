"""
Binary Reader

Little-endian primitive reads over an in-memory buffer, used by the raw grid
codec.
"""

import struct
from io import BytesIO

import numpy as np


class BinaryReader:
    """
    Sequential reader for little-endian binary payloads.

    Every read either returns exactly the requested data or raises EOFError.
    """

    def __init__(self, data: bytes):
        self.stream = BytesIO(data)
        self.position = 0

    def read_bytes(self, count: int) -> bytes:
        """Read a specific number of bytes."""
        data = self.stream.read(count)
        if len(data) != count:
            raise EOFError(f"Expected {count} bytes, got {len(data)}")
        self.position += count
        return data

    def read_uint32(self) -> int:
        """Read an unsigned 32-bit integer (little-endian)."""
        return struct.unpack("<I", self.read_bytes(4))[0]

    def read_float32_array(self, count: int) -> np.ndarray:
        """Read `count` little-endian float32 values."""
        return np.frombuffer(self.read_bytes(4 * count), dtype="<f4").copy()

    def remaining_bytes(self) -> int:
        current = self.stream.tell()
        self.stream.seek(0, 2)
        end = self.stream.tell()
        self.stream.seek(current)
        return end - current

    def is_at_end(self) -> bool:
        return self.remaining_bytes() == 0
