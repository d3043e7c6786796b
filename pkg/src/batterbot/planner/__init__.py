"""Image to pour-trajectory planning."""
from .graph import SkeletonGraph, build_graph, mst_refine, tree_to_strokes
from .morphology import (
    Loop,
    PlanningError,
    ShapeMode,
    classify_shape,
    component_contours,
    concentric_loops,
    disk,
    erode,
    trace_boundary,
)
from .pgm import BinaryMask, PGMParseError, load_pgm, read_pgm, save_pgm, write_pgm
from .skeleton import is_thin, skeletonize
from .trajectory import (
    Stroke,
    Trajectory,
    douglas_peucker,
    pixel_strokes,
    plan_trajectory,
    to_world,
)

__all__ = [
    "BinaryMask", "PGMParseError", "load_pgm", "read_pgm", "save_pgm", "write_pgm",
    "PlanningError", "ShapeMode", "disk", "erode", "classify_shape", "trace_boundary",
    "component_contours", "Loop", "concentric_loops", "skeletonize", "is_thin",
    "SkeletonGraph", "build_graph", "mst_refine", "tree_to_strokes",
    "Stroke", "Trajectory", "douglas_peucker", "pixel_strokes", "to_world", "plan_trajectory",
]
