"""Zhang-Suen thinning with a topology guard."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

__all__ = ["skeletonize", "neighbourhood_codes", "is_thin"]

# bit k <-> neighbour P(k+2) in Zhang-Suen numbering: N, NE, E, SE, S, SW, W, NW
_OFFSETS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def neighbourhood_codes(img: np.ndarray) -> np.ndarray:
    p = np.pad(img.astype(np.uint16), 1)
    h, w = img.shape
    code = np.zeros((h, w), dtype=np.uint16)
    for bit, (dr, dc) in enumerate(_OFFSETS):
        code |= p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w] << bit
    return code


def _bits(code):
    return [(code >> k) & 1 for k in range(8)]


def _tables():
    zs1 = np.zeros(256, bool)
    zs2 = np.zeros(256, bool)
    simple = np.zeros(256, bool)
    count = np.zeros(256, np.uint8)
    for code in range(256):
        p = _bits(code)  # p[0]=P2 ... p[7]=P9
        b = sum(p)
        a = sum(1 for k in range(8) if p[k] == 0 and p[(k + 1) % 8] == 1)
        p2, p3, p4, p5, p6, p7, p8, p9 = p
        base = 2 <= b <= 6 and a == 1
        zs1[code] = base and p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
        zs2[code] = base and p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
        simple[code] = _is_simple(p)
        count[code] = b
    return zs1, zs2, simple, count


def _is_simple(p):
    """8-simple test on a 3x3 neighbourhood (foreground 8-, background 4-connected)."""
    grid = np.zeros((3, 3), bool)
    for k, (dr, dc) in enumerate(_OFFSETS):
        grid[1 + dr, 1 + dc] = bool(p[k])
    fg = grid.copy()
    if not fg.any():
        return False
    _, n_fg = ndimage.label(fg, structure=np.ones((3, 3)))
    bg = ~grid
    bg[1, 1] = False
    lab, _ = ndimage.label(bg, structure=ndimage.generate_binary_structure(2, 1))
    touching = {lab[r, c] for r, c in ((0, 1), (1, 0), (1, 2), (2, 1)) if lab[r, c]}
    return n_fg == 1 and len(touching) == 1


_ZS1, _ZS2, _SIMPLE, _COUNT = _tables()


def _local_code(img, r, c):
    h, w = img.shape
    code = 0
    for bit, (dr, dc) in enumerate(_OFFSETS):
        rr, cc = r + dr, c + dc
        if 0 <= rr < h and 0 <= cc < w and img[rr, cc]:
            code |= 1 << bit
    return code


def _delete_guarded(img, candidates) -> bool:
    changed = False
    for r, c in zip(*np.nonzero(candidates)):
        code = _local_code(img, r, c)
        if _SIMPLE[code] and _COUNT[code] >= 2:
            img[r, c] = False
            changed = True
    return changed


def _n_components(img) -> int:
    return ndimage.label(img, structure=np.ones((3, 3)))[1]


def _square_cleanup(img) -> bool:
    blocks = img[:-1, :-1] & img[1:, :-1] & img[:-1, 1:] & img[1:, 1:]
    cand = np.zeros_like(img)
    for dr in (0, 1):
        for dc in (0, 1):
            cand[dr:dr + blocks.shape[0], dc:dc + blocks.shape[1]] |= blocks
    return _delete_guarded(img, cand & img)


def skeletonize(mask) -> np.ndarray:
    """One-pixel-wide medial skeleton of a boolean raster.

    Plain parallel Zhang-Suen sub-iterations, except that a sub-iteration
    which would split or erase a component (2x2 squares, two-pixel-thick
    diagonals) is redone one pixel at a time, deleting only points that are
    still simple. Leftover 2x2 blocks are broken the same way.
    """
    from .pgm import BinaryMask

    img = np.array(mask.pixels if isinstance(mask, BinaryMask) else mask, dtype=bool)
    while True:
        changed = False
        for table in (_ZS1, _ZS2):
            cand = img & table[neighbourhood_codes(img)]
            if not cand.any():
                continue
            trial = img & ~cand
            if _n_components(trial) == _n_components(img):
                img = trial
                changed = True
            else:
                changed |= _delete_guarded(img, cand)
        if not changed:
            changed = _square_cleanup(img)
            if not changed:
                break
    return img


def is_thin(img) -> bool:
    img = np.asarray(img, dtype=bool)
    return not (img[:-1, :-1] & img[1:, :-1] & img[:-1, 1:] & img[1:, 1:]).any()
