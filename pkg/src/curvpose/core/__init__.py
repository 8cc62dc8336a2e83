"""
Core components: rigid geometry, camera model, error hierarchy and configs.
"""

from .errors import CurvposeError
from .geometry import Camera, Pose, Ray

__all__ = ["Camera", "CurvposeError", "Pose", "Ray"]
