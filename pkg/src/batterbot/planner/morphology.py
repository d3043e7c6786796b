"""Erosion, boundary tracing and concentric fill loops for enclosed shapes."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .pgm import BinaryMask

__all__ = [
    "ShapeMode",
    "PlanningError",
    "disk",
    "erode",
    "classify_shape",
    "trace_boundary",
    "component_contours",
    "Loop",
    "concentric_loops",
]

EIGHT = np.ones((3, 3), dtype=bool)
FOUR = ndimage.generate_binary_structure(2, 1)

# clockwise on screen (rows grow downward), starting east
_DIRS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}


class PlanningError(ValueError):
    pass


class ShapeMode(str, enum.Enum):
    ENCLOSED = "enclosed"
    OPEN_LINES = "open"


def _pixels(mask):
    return mask.pixels if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)


def disk(radius: float) -> np.ndarray:
    r = int(math.floor(radius))
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return xx * xx + yy * yy <= radius * radius


def _depth(px: np.ndarray) -> np.ndarray:
    """Euclidean distance to the nearest background pixel, outside counts as background."""
    padded = np.pad(px, 1)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def erode(mask, radius_px: float):
    """Erode by a discrete disk; same type as the input.

    A pixel survives when no background pixel (or the image border) lies
    within ``radius_px``, which is a threshold on the distance transform.
    """
    if radius_px < 1:
        raise PlanningError("erosion radius must be >= 1 px")
    px = _pixels(mask)
    out = _depth(px) > radius_px
    return BinaryMask(out, mask.scale) if isinstance(mask, BinaryMask) else out


def classify_shape(mask, stroke_width_px: float) -> ShapeMode:
    """Enclosed when the shape still has pixels after eroding by one stroke width."""
    px = _pixels(mask)
    if not px.any():
        raise PlanningError("mask is empty")
    inner = erode(px, max(stroke_width_px, 1))
    return ShapeMode.ENCLOSED if inner.any() else ShapeMode.OPEN_LINES


def trace_boundary(px: np.ndarray, start, back) -> np.ndarray:
    """Moore-neighbour border following on an 8-connected region.

    ``start`` is a foreground pixel and ``back`` a background 8-neighbour of
    it; the search sweeps clockwise from ``back``. Returns (row, col) pairs
    without repeating the first point.
    """
    h, w = px.shape

    def fg(r, c):
        return 0 <= r < h and 0 <= c < w and px[r, c]

    def step(p, b):
        k = _DIR_INDEX[(b[0] - p[0], b[1] - p[1])]
        prev = b
        for i in range(1, 9):
            dr, dc = _DIRS[(k + i) % 8]
            q = (p[0] + dr, p[1] + dc)
            if fg(*q):
                return q, prev
            prev = q
        return None, None

    p, b = tuple(start), tuple(back)
    first_next = None
    out = []
    limit = 4 * int(px.sum()) + 16
    for _ in range(limit):
        nxt, nb = step(p, b)
        if nxt is None:
            return np.array([p])
        if first_next is None:
            first_next = nxt
        elif p == tuple(start) and nxt == first_next:
            return np.array(out)
        out.append(p)
        p, b = nxt, nb
    raise PlanningError("boundary tracing did not close")


def component_contours(px: np.ndarray):
    """Outer and hole contours of every 8-connected component.

    Yields ``(points, is_hole)`` with components in raster order of their
    first pixel, each component's outer contour before its holes.
    """
    px = np.asarray(px, dtype=bool)
    labels, n = ndimage.label(px, structure=EIGHT)
    if n == 0:
        return []
    bg_labels, nb = ndimage.label(~px, structure=FOUR)
    border = set(np.unique(np.concatenate([
        bg_labels[0], bg_labels[-1], bg_labels[:, 0], bg_labels[:, -1]])).tolist())
    holes_by_comp: dict[int, list] = {}
    if nb:
        firsts = ndimage.minimum_position(np.arange(bg_labels.size).reshape(bg_labels.shape),
                                          bg_labels, range(1, nb + 1))
        for lab, (r, c) in zip(range(1, nb + 1), firsts):
            if lab in border:
                continue
            owner = labels[r - 1, c]
            holes_by_comp.setdefault(int(owner), []).append((r, c))
    order = np.arange(px.size).reshape(px.shape)
    comp_first = ndimage.minimum_position(order, labels, range(1, n + 1))
    out = []
    for lab, (r, c) in sorted(zip(range(1, n + 1), comp_first), key=lambda t: t[1]):
        comp = labels == lab
        out.append((trace_boundary(comp, (r, c), (r, c - 1)), False))
        for hr, hc in sorted(holes_by_comp.get(lab, [])):
            out.append((trace_boundary(comp, (hr - 1, hc), (hr, hc)), True))
    return out


@dataclass(frozen=True)
class Loop:
    """Closed pixel loop; ``points`` are (x, y) = (col, row)."""

    points: np.ndarray
    level: int
    is_hole: bool = False


def concentric_loops(mask, stroke_width_px: float, check_mode: bool = True) -> list[Loop]:
    """Nested fill loops, outermost first.

    Level ``k`` traces the boundary of the shape eroded by
    ``ceil(w / 2) + k * w`` pixels, so a stroke of width ``w`` centred on
    loop 0 stays inside the original outline. When the last regular level
    would leave an uncovered core, one extra loop is traced one pixel
    inside the medial ridge.
    """
    px = _pixels(mask)
    if not px.any():
        raise PlanningError("mask is empty")
    if check_mode and classify_shape(px, stroke_width_px) is not ShapeMode.ENCLOSED:
        raise PlanningError("shape is not enclosed at this stroke width")
    depth = _depth(px)
    dmax = float(depth.max())
    loops = []
    k = 0
    covered = 0.0
    while True:
        radius = math.ceil(stroke_width_px / 2) + k * stroke_width_px
        if radius >= dmax - 1.0:
            # thinner than a pixel past the ridge: clip, if anything is left to cover
            if covered >= dmax - 0.5 or dmax <= 1.0:
                break
            radius = dmax - 1.0
        level = depth > radius
        if not level.any():
            break
        for rc, hole in component_contours(level):
            loops.append(Loop(rc[:, ::-1].copy(), k, hole))
        covered = radius + stroke_width_px / 2
        k += 1
    return loops
