"""
curvpose

Multi-view 6D object pose estimation from center and curvature heatmaps:
oracle heatmap synthesis, 3D center triangulation, distance-transform
render-and-compare scoring, sequential pose optimization and BOP-style
pose-error metrics.
"""

__version__ = "0.1.0"
__author__ = "curvpose developers"
