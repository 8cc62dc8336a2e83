"""
Services: heatmaps, center triangulation, cost function, optimization,
metrics and the staged solve workflow.
"""

from .centers import Center3D, centers_from_heatmaps
from .costfn import SceneContext, batch_cost, benchmark_cost, distance_transform, scene_cost
from .heatmaps import Heatmap, OracleHeatmaps, detect_peaks, synthesize_oracle
from .metrics import EvaluationReport, average_recall, evaluate_scene, mspd, mssd
from .optimizer import ConvergenceTrace, SceneEstimate, optimize_scene
from .pipeline import PoseEstimationWorkflow, PoseStage, SolveSession
from .simplex import SimplexOptions, nelder_mead

__all__ = [
    "Center3D",
    "centers_from_heatmaps",
    "SceneContext",
    "batch_cost",
    "benchmark_cost",
    "distance_transform",
    "scene_cost",
    "Heatmap",
    "OracleHeatmaps",
    "detect_peaks",
    "synthesize_oracle",
    "EvaluationReport",
    "average_recall",
    "evaluate_scene",
    "mspd",
    "mssd",
    "ConvergenceTrace",
    "SceneEstimate",
    "optimize_scene",
    "PoseEstimationWorkflow",
    "PoseStage",
    "SolveSession",
    "SimplexOptions",
    "nelder_mead",
]
