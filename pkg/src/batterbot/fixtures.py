"""Procedural test shapes at 1 mm per pixel."""
from __future__ import annotations

import numpy as np

from .planner.pgm import BinaryMask

__all__ = ["disk_mask", "annulus_mask", "star_mask", "letter_mask", "smiley_mask", "FIXTURES",
           "fixture"]


def _grid(size):
    yy, xx = np.mgrid[:size, :size]
    c = (size - 1) / 2
    return xx - c, yy - c


def disk_mask(radius: float = 40, size: int = 100, scale: float = 0.001) -> BinaryMask:
    x, y = _grid(size)
    return BinaryMask(np.hypot(x, y) <= radius, scale)


def annulus_mask(outer: float = 45, inner: float = 15, size: int = 100,
                 scale: float = 0.001) -> BinaryMask:
    x, y = _grid(size)
    r = np.hypot(x, y)
    return BinaryMask((r <= outer) & (r >= inner), scale)


def star_mask(outer: float = 46, inner: float = 24, points: int = 5, size: int = 100,
              scale: float = 0.001) -> BinaryMask:
    """Filled star polygon, point up."""
    x, y = _grid(size)
    k = np.arange(2 * points)
    ang = -np.pi / 2 + np.pi * k / points
    rad = np.where(k % 2 == 0, outer, inner)
    vx, vy = rad * np.cos(ang), rad * np.sin(ang)
    # even-odd point-in-polygon
    inside = np.zeros(x.shape, bool)
    for i in range(len(vx)):
        x0, y0, x1, y1 = vx[i - 1], vy[i - 1], vx[i], vy[i]
        crosses = (y0 > y) != (y1 > y)
        xi = x0 + (y - y0) * (x1 - x0) / np.where(y1 != y0, y1 - y0, 1)
        inside ^= crosses & (x < xi)
    return BinaryMask(inside, scale)


def letter_mask(size: int = 100, bar: int = 22, scale: float = 0.001) -> BinaryMask:
    """Block capital 'T' with bars ``bar`` px thick."""
    px = np.zeros((size, size), bool)
    m = 10
    px[m:m + bar, m:size - m] = True
    c0 = size // 2 - bar // 2
    px[m:size - m, c0:c0 + bar] = True
    return BinaryMask(px, scale)


def _ring(x, y, cx, cy, r, half):
    return np.abs(np.hypot(x - cx, y - cy) - r) <= half


def smiley_mask(size: int = 120, thickness: float = 10, scale: float = 0.001) -> BinaryMask:
    """Face outline, two eyes and a mouth arc, drawn ``thickness`` px wide."""
    x, y = _grid(size)
    h = thickness / 2
    face = _ring(x, y, 0, 0, 48, h)
    eyes = (np.hypot(x + 18, y + 16) <= h) | (np.hypot(x - 18, y + 16) <= h)
    mouth = _ring(x, y, 0, 2, 26, h) & (y > 12)
    return BinaryMask(face | eyes | mouth, scale)


FIXTURES = {
    "disk": disk_mask,
    "annulus": annulus_mask,
    "star": star_mask,
    "letter": letter_mask,
    "smiley": smiley_mask,
}


def fixture(name: str) -> BinaryMask:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
