"""
Rendering package: meshes, rasterization and curvature maps.
"""

from .curvature import RenderedViews, ViewRender, curvature_from_normals, render_curvature
from .mesh import Mesh, load_mesh, save_mesh_ply
from .rasterizer import EMPTY_INDEX, PixelWindow, ViewBuffers, rasterize, screen_window

__all__ = [
    "EMPTY_INDEX",
    "Mesh",
    "PixelWindow",
    "RenderedViews",
    "ViewBuffers",
    "ViewRender",
    "curvature_from_normals",
    "load_mesh",
    "rasterize",
    "render_curvature",
    "save_mesh_ply",
    "screen_window",
]
