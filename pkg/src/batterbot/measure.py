"""Width and area measurements on a deposition grid."""
from __future__ import annotations

import math

import numpy as np

from .sim import DepositionGrid

__all__ = ["MeasurementError", "DEPOSIT_THRESHOLD", "measure_stroke_width", "measure_disk",
           "deposit_mask"]

DEPOSIT_THRESHOLD = 1e-4  # 0.1 mm


class MeasurementError(ValueError):
    pass


def deposit_mask(grid: DepositionGrid, threshold: float = DEPOSIT_THRESHOLD) -> np.ndarray:
    return grid.cells > threshold


def _lookup(grid: DepositionGrid, pts: np.ndarray) -> np.ndarray:
    """Nearest-cell thickness at world points; zero outside the grid."""
    h, w = grid.cells.shape
    j = np.floor((pts[..., 0] - grid.origin[0]) / grid.resolution).astype(int)
    i = np.floor((pts[..., 1] - grid.origin[1]) / grid.resolution).astype(int)
    inside = (i >= 0) & (i < h) & (j >= 0) & (j < w)
    out = np.zeros(pts.shape[:-1])
    out[inside] = grid.cells[i[inside], j[inside]]
    return out


def _stations(path: np.ndarray, spacing: float, skip: float):
    seg = np.diff(path, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    s = np.arange(skip, total - skip + 1e-12, spacing)
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[k]) / np.where(seg_len[k] > 0, seg_len[k], 1.0)
    pos = path[k] + frac[:, None] * seg[k]
    tangent = seg[k] / np.where(seg_len[k] > 0, seg_len[k], 1.0)[:, None]
    normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)
    return pos, normal


def _cross_widths(grid, pos, normal, threshold, reach):
    step = grid.resolution / 8
    n = int(math.ceil(reach / step))
    offs = np.arange(-n, n + 1) * step
    pts = pos[:, None, :] + offs[None, :, None] * normal[:, None, :]
    above = _lookup(grid, pts) > threshold
    widths = np.zeros(len(pos))
    for k, row in enumerate(above):
        if not row[n]:
            continue
        # contiguous run through the stroke centre
        right = np.argmin(row[n:]) if not row[n:].all() else len(row) - n
        left = np.argmin(row[n::-1]) if not row[n::-1].all() else n + 1
        widths[k] = (right + left - 1) * step
    return widths


def measure_stroke_width(grid: DepositionGrid, stroke, spacing: float = 0.002,
                         threshold: float = DEPOSIT_THRESHOLD, reach: float = 0.1):
    """Mean and variance of the deposited width across a stroke.

    Cross-sections are taken perpendicular to the path every ``spacing``
    metres, skipping one half-width at each end. The width at a station is
    the length of the above-threshold run through the path.

    Parameters
    ----------
    stroke : (n, 2) array or object with a ``path()`` method
        The commanded path in world coordinates.
    """
    path = np.asarray(stroke.path() if hasattr(stroke, "path") else stroke, dtype=float)
    if path.ndim != 2 or len(path) < 2:
        raise MeasurementError("stroke needs at least two points")
    if not (grid.cells > threshold).any():
        raise MeasurementError("grid holds no deposit")
    lo = np.array(grid.origin)
    hi = lo + grid.resolution * np.array(grid.cells.shape[::-1])
    if np.any(path < lo) or np.any(path > hi):
        raise MeasurementError("stroke lies outside the grid")
    # first pass near the middle to size the end caps
    pos, normal = _stations(path, spacing, 0.0)
    probe = _cross_widths(grid, pos, normal, threshold, reach)
    half = 0.5 * float(np.median(probe[probe > 0])) if (probe > 0).any() else 0.0
    pos, normal = _stations(path, spacing, half)
    if len(pos) == 0:
        raise MeasurementError("stroke shorter than its end caps")
    widths = _cross_widths(grid, pos, normal, threshold, reach)
    return float(widths.mean()), float(widths.var())


def measure_disk(grid: DepositionGrid, threshold: float = DEPOSIT_THRESHOLD):
    """Deposited area (m^2) and equivalent diameter (m)."""
    count = int(deposit_mask(grid, threshold).sum())
    if count == 0:
        raise MeasurementError("grid holds no deposit")
    area = count * grid.resolution**2
    return area, 2.0 * math.sqrt(area / math.pi)
