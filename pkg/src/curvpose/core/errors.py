"""
Error hierarchy for curvpose.

Every error raised by the library derives from `CurvposeError` and declares the
process exit code the CLI uses when it surfaces the error.
"""


class CurvposeError(Exception):
    """Base class for all curvpose errors."""

    exit_code = 4


# -------------------- Geometry --------------------


class InvalidPoseError(CurvposeError, ValueError):
    """A rotation is not orthonormal with determinant +1."""

    exit_code = 3


class BehindCameraError(CurvposeError):
    """A point has non-positive depth in the camera frame."""


class ParallelRaysError(CurvposeError):
    """Two rays are (nearly) parallel; their closest points are undefined."""


# -------------------- Rendering / cost --------------------


class ShapeMismatchError(CurvposeError, ValueError):
    """Two grids that must share a shape do not."""


class EmptyMeshError(CurvposeError, ValueError):
    """A vertex set needed for evaluation is empty."""


class InvalidHeatmapError(CurvposeError, ValueError):
    """A heatmap grid violates its value range (negative, or above 1 for centers)."""

    exit_code = 3


# -------------------- Centers / optimization --------------------


class InsufficientViewsError(CurvposeError):
    """Triangulation needs at least two views."""


class NonFiniteObjectiveError(CurvposeError):
    """The objective returned NaN or infinity."""


class EmptySceneError(CurvposeError):
    """Pose optimization was asked to run without any object center."""


class PlacementFailedError(CurvposeError):
    """Rejection sampling could not place all objects of a synthetic scene."""


# -------------------- Validation / configuration --------------------


class ConfigError(CurvposeError, ValueError):
    """A configuration value is out of range or unknown."""

    exit_code = 3


class InvalidDimensionsError(CurvposeError, ValueError):
    """Primitive mesh dimensions must be positive."""

    exit_code = 3


class SceneValidationError(CurvposeError, ValueError):
    """A scene document is well-formed JSON but semantically invalid."""

    exit_code = 3


class UnknownVersionError(CurvposeError, ValueError):
    """A file declares a format version this release cannot read."""

    exit_code = 3


# -------------------- I/O --------------------


class MalformedFileError(CurvposeError, ValueError):
    """A file could not be parsed (truncated JSON, bad header, ...)."""

    exit_code = 2


class MissingMeshFileError(CurvposeError, FileNotFoundError):
    """A mesh referenced by a scene file does not exist."""

    exit_code = 2
