"""Pixel polylines to world-frame pour trajectories."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import build_graph, mst_refine, tree_to_strokes
from .morphology import PlanningError, ShapeMode, classify_shape, concentric_loops
from .pgm import BinaryMask
from .skeleton import skeletonize

__all__ = [
    "Stroke",
    "Trajectory",
    "douglas_peucker",
    "pixel_strokes",
    "to_world",
    "plan_trajectory",
]


@dataclass
class Stroke:
    """World-frame polyline (metres). Closed strokes imply the last->first edge."""

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(self.points) < 2:
            raise PlanningError("a stroke needs at least two points")
        if np.any(np.all(np.diff(self.points, axis=0) == 0, axis=1)):
            raise PlanningError("consecutive stroke points must differ")

    def path(self) -> np.ndarray:
        """Vertices in drawing order, with the first repeated at the end if closed."""
        return np.vstack([self.points, self.points[:1]]) if self.closed else self.points

    @property
    def length(self) -> float:
        seg = np.diff(self.path(), axis=0)
        return float(np.hypot(seg[:, 0], seg[:, 1]).sum())


@dataclass
class Trajectory:
    strokes: list = field(default_factory=list)
    stroke_width: float = 0.01

    def __len__(self):
        return len(self.strokes)

    def to_dict(self) -> dict:
        return {
            "stroke_width_m": self.stroke_width,
            "strokes": [
                {"closed": s.closed, "points": [[float(x), float(y)] for x, y in s.points]}
                for s in self.strokes
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        try:
            strokes = [Stroke(s["points"], bool(s.get("closed", False))) for s in d["strokes"]]
            return cls(strokes, float(d["stroke_width_m"]))
        except (KeyError, TypeError) as exc:
            raise PlanningError(f"malformed trajectory: {exc}") from None

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "Trajectory":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_svg(self, size_px: int = 400) -> str:
        pts = np.vstack([s.points for s in self.strokes]) if self.strokes else np.zeros((1, 2))
        lo = pts.min(axis=0) - self.stroke_width
        span = float(max(np.ptp(pts, axis=0).max() + 2 * self.stroke_width, 1e-9))
        k = size_px / span
        lines = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{size_px}" height="{size_px}">',
        ]
        for s in self.strokes:
            xy = " ".join(f"{(x - lo[0]) * k:.2f},{(y - lo[1]) * k:.2f}" for x, y in s.path())
            lines.append(
                f'<polyline points="{xy}" fill="none" stroke="#c8902e" '
                f'stroke-width="{self.stroke_width * k:.2f}" stroke-linecap="round" stroke-linejoin="round"/>'
            )
        lines.append("</svg>")
        return "\n".join(lines) + "\n"


def _dp_open(pts: np.ndarray, tol: float) -> np.ndarray:
    keep = np.zeros(len(pts), dtype=bool)
    keep[[0, -1]] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        a, b = pts[i], pts[j]
        seg = pts[i + 1:j] - a
        d = b - a
        ll = float(d @ d)
        if ll == 0:
            dist = np.hypot(seg[:, 0], seg[:, 1])
        else:
            t = np.clip(seg @ d / ll, 0.0, 1.0)
            dist = np.hypot(*(seg - np.outer(t, d)).T)
        k = int(np.argmax(dist))
        if dist[k] > tol:
            m = i + 1 + k
            keep[m] = True
            stack.extend([(i, m), (m, j)])
    return pts[keep]


def douglas_peucker(points, tol: float = 0.5, closed: bool = False) -> np.ndarray:
    """Ramer-Douglas-Peucker simplification.

    Closed rings are split at the vertex farthest from the first one and
    each half simplified separately.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        return pts.copy()
    if not closed:
        return _dp_open(pts, tol)
    far = int(np.argmax(np.hypot(*(pts - pts[0]).T)))
    if far == 0:
        return pts[:1].copy()
    ring = np.vstack([pts, pts[:1]])
    first = _dp_open(ring[:far + 1], tol)
    second = _dp_open(ring[far:], tol)
    return np.vstack([first, second[1:-1]])


def pixel_strokes(mask: BinaryMask, stroke_width_px: float, mode="auto"):
    """Plan in pixel space; returns ``(mode, [(points_xy, closed), ...])``."""
    mode = ShapeMode(mode) if mode != "auto" else classify_shape(mask, stroke_width_px)
    if mode is ShapeMode.ENCLOSED:
        loops = concentric_loops(mask, stroke_width_px, check_mode=False)
        if not loops:
            raise PlanningError("shape vanishes after the half-stroke inset")
        return mode, [(lp.points, True) for lp in loops]
    skel = skeletonize(mask)
    tree = mst_refine(build_graph(skel))
    return mode, [(s, False) for s in tree_to_strokes(tree)]


def _clean(points, closed):
    pts = np.asarray(points, dtype=float)
    keep = np.ones(len(pts), bool)
    keep[1:] = np.any(np.diff(pts, axis=0) != 0, axis=1)
    pts = pts[keep]
    if closed and len(pts) > 1 and np.all(pts[0] == pts[-1]):
        pts = pts[:-1]
    if len(pts) == 1:
        # a lone pixel becomes a one-pixel dash so it still gets batter
        x, y = pts[0]
        return np.array([[x - 0.5, y], [x + 0.5, y]]), False
    if closed and len(pts) == 2:
        closed = False
    return pts, closed


def to_world(pixel_paths, scale: float, plate_origin=(0.0, 0.0), stroke_width: float = 0.01,
             simplify: bool = True, tol_px: float = 0.5) -> Trajectory:
    """Map (x, y) pixel polylines to metres: ``origin + scale * (x, y)``."""
    if not scale > 0:
        raise PlanningError("scale must be positive")
    origin = np.asarray(plate_origin, dtype=float)
    strokes = []
    for points, closed in pixel_paths:
        pts, closed = _clean(points, closed)
        if simplify and len(pts) > 2:
            pts, closed = _clean(douglas_peucker(pts, tol_px, closed), closed)
        strokes.append(Stroke(origin + scale * pts, closed))
    return Trajectory(strokes, stroke_width)


def plan_trajectory(mask: BinaryMask, stroke_width: float, mode="auto", plate_origin=(0.0, 0.0),
                    simplify: bool = True) -> Trajectory:
    """Binary image to an ordered pour trajectory with strokes of ``stroke_width`` metres."""
    if not mask.pixels.any():
        raise PlanningError("mask is empty")
    width_px = stroke_width / mask.scale
    _, paths = pixel_strokes(mask, width_px, mode)
    return to_world(paths, mask.scale, plate_origin, stroke_width, simplify)
