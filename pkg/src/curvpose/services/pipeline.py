"""
Pose Estimation Workflow

Runs the heatmaps-to-poses chain as a staged session: peak detection and
triangulation per object class, then sequential render-and-compare pose
optimization against the curvature targets.
"""

import logging
import time
from datetime import datetime
from enum import Enum, auto
from typing import Any, Dict, List, Optional, Sequence

from ..core.config import PipelineConfig
from ..core.errors import CurvposeError, EmptySceneError
from ..core.geometry import Camera
from ..scene.scene_io import ObjectClass
from .centers import Center3D, centers_from_heatmaps
from .costfn import SceneContext
from .heatmaps import OracleHeatmaps
from .optimizer import ConvergenceTrace, SceneEstimate, optimize_scene


class PoseStage(Enum):
    """Stages of one solve."""

    WAITING = auto()
    CENTERS = auto()  # Peaks, triangulation, merge, refinement, pruning
    POSES = auto()  # Candidate scoring and simplex refinement
    COMPLETED = auto()
    FAILED = auto()


class SolveSession:
    """State of a single solve from heatmaps to pose estimates."""

    def __init__(self, session_id: str, heatmaps: OracleHeatmaps, cameras: Sequence[Camera]):
        self.session_id = session_id
        self.heatmaps = heatmaps
        self.cameras = list(cameras)
        self.stage = PoseStage.WAITING
        self.started_at = datetime.now()
        self.timings: Dict[str, float] = {}
        self.centers: List[Center3D] = []
        self.estimate: Optional[SceneEstimate] = None
        self.trace = ConvergenceTrace()
        self.results: Dict[str, Any] = {}
        self.errors: List[str] = []
        self.exception: Optional[CurvposeError] = None

    @property
    def succeeded(self) -> bool:
        return self.stage == PoseStage.COMPLETED


class PoseEstimationWorkflow:
    """
    Staged pose estimation over oracle (or predicted) heatmaps.

    Workflow Steps:
    1. Detect center peaks per class and view, triangulate and prune centers
    2. Build distance maps from the curvature targets
    3. Optimize object poses in order of decreasing center score
    """

    def __init__(self, classes: Dict[int, ObjectClass], config: Optional[PipelineConfig] = None):
        self.logger = logging.getLogger(__name__)
        self.classes = classes
        self.config = config or PipelineConfig()
        self.sessions: Dict[str, SolveSession] = {}

    def start_session(
        self,
        heatmaps: OracleHeatmaps,
        cameras: Sequence[Camera],
        session_id: Optional[str] = None,
        centers: Optional[Sequence[Center3D]] = None,
    ) -> SolveSession:
        """
        Run a solve to completion.

        Args:
            heatmaps: per-class center maps and per-view curvature targets
            cameras: one camera per heatmap view
            session_id: optional custom session ID
            centers: precomputed centers; skips the CENTERS stage

        Returns:
            The finished session; on failure its stage is FAILED and the
            error is kept in `session.exception`.
        """
        if session_id is None:
            session_id = f"solve_{len(self.sessions):04d}"
        if heatmaps.n_views != len(cameras):
            raise ValueError(
                f"Got heatmaps for {heatmaps.n_views} views but {len(cameras)} cameras"
            )

        session = SolveSession(session_id, heatmaps, cameras)
        self.sessions[session_id] = session
        self.logger.info(f"Started solve session {session_id} with {len(cameras)} views")
        if centers is not None:
            session.centers = list(centers)
        self._execute(session, compute_centers=centers is None)
        return session

    def centers_only(
        self, heatmaps: OracleHeatmaps, cameras: Sequence[Camera]
    ) -> List[Center3D]:
        session = SolveSession("centers", heatmaps, cameras)
        self._find_centers(session)
        return session.centers

    def _execute(self, session: SolveSession, compute_centers: bool = True) -> None:
        try:
            if compute_centers:
                session.stage = PoseStage.CENTERS
                self._timed(session, "centers", self._find_centers)

            session.stage = PoseStage.POSES
            self._timed(session, "poses", self._optimize_poses)

            session.stage = PoseStage.COMPLETED
            self.logger.info(f"Solve completed for session {session.session_id}")

        except CurvposeError as e:
            self.logger.error(f"Solve error in session {session.session_id}: {e}")
            session.errors.append(str(e))
            session.exception = e
            session.stage = PoseStage.FAILED

    def _timed(self, session: SolveSession, name: str, step) -> None:
        start = time.perf_counter()
        step(session)
        session.timings[name] = time.perf_counter() - start
        self.logger.debug(f"Stage {name} took {session.timings[name]:.3f}s")

    def _find_centers(self, session: SolveSession) -> None:
        """Triangulate centers class by class in ascending class id."""
        self.logger.info(f"Finding centers for session {session.session_id}")
        centers: List[Center3D] = []
        for class_id in sorted(session.heatmaps.centers):
            centers.extend(
                centers_from_heatmaps(
                    session.heatmaps.centers[class_id],
                    session.cameras,
                    self.config.heatmaps,
                    self.config.triangulation,
                    class_id=class_id,
                )
            )
        session.centers = centers
        session.results["n_centers"] = len(centers)

    def _optimize_poses(self, session: SolveSession) -> None:
        if not session.centers:
            raise EmptySceneError(f"No object centers found in session {session.session_id}")
        self.logger.info(
            f"Optimizing {len(session.centers)} objects for session {session.session_id}"
        )
        context = SceneContext.from_targets(
            session.cameras, session.heatmaps.curvature, self.config.cost
        )
        session.estimate = optimize_scene(
            session.centers, self.classes, context, self.config.optimizer, trace=session.trace
        )
        session.results["costs"] = [o.cost for o in session.estimate.objects]
