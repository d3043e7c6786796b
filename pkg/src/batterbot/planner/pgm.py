"""Minimal netpbm graymap (P2/P5) reader and writer."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["BinaryMask", "PGMParseError", "read_pgm", "write_pgm", "load_pgm", "save_pgm"]

THRESHOLD = 128


class PGMParseError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass
class BinaryMask:
    """Boolean raster; ``scale`` is metres per pixel. Row 0 is the top row."""

    pixels: np.ndarray
    scale: float = 0.001

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=bool)
        if self.pixels.ndim != 2:
            raise ValueError("mask must be 2-D")
        if not self.scale > 0:
            raise ValueError("mask scale must be positive")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.scale == other.scale and np.array_equal(self.pixels, other.pixels)

    def count(self) -> int:
        return int(self.pixels.sum())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space(self):
        d = self.data
        while self.pos < len(d):
            ch = d[self.pos:self.pos + 1]
            if ch == b"#":
                nl = d.find(b"\n", self.pos)
                self.pos = len(d) if nl < 0 else nl + 1
            elif ch.isspace():
                self.pos += 1
            else:
                break

    def token(self, what) -> int:
        self.skip_space()
        start = self.pos
        d = self.data
        while self.pos < len(d) and not d[self.pos:self.pos + 1].isspace() and d[self.pos:self.pos + 1] != b"#":
            self.pos += 1
        tok = d[start:self.pos]
        if not tok:
            raise PGMParseError(f"unexpected end of file reading {what}", start)
        if not tok.isdigit():
            raise PGMParseError(f"bad {what} {tok[:16]!r}", start)
        return int(tok)


def read_pgm(path_or_bytes) -> np.ndarray:
    """Parse a P2 or P5 file; returns ``(values, maxval)``."""
    data = path_or_bytes if isinstance(path_or_bytes, bytes) else Path(path_or_bytes).read_bytes()
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise PGMParseError(f"not a P2/P5 graymap (magic {data[:2]!r})", 0)
    binary = data[:2] == b"P5"
    r = _Reader(data)
    r.pos = 2
    if r.pos < len(data) and not data[r.pos:r.pos + 1].isspace() and data[r.pos:r.pos + 1] != b"#":
        raise PGMParseError("missing whitespace after magic", r.pos)
    width = r.token("width")
    height = r.token("height")
    maxval = r.token("maxval")
    if width <= 0 or height <= 0:
        raise PGMParseError("image dimensions must be positive", r.pos)
    if not 0 < maxval < 65536:
        raise PGMParseError(f"maxval {maxval} out of range", r.pos)
    n = width * height
    if binary:
        if r.pos >= len(data) or not data[r.pos:r.pos + 1].isspace():
            raise PGMParseError("missing whitespace before raster", r.pos)
        start = r.pos + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = n * dtype.itemsize
        if len(data) - start < need:
            raise PGMParseError(f"raster truncated: need {need} bytes, have {len(data) - start}", start)
        values = np.frombuffer(data, dtype=dtype, count=n, offset=start).astype(np.int64)
    else:
        values = np.array([r.token("pixel") for _ in range(n)], dtype=np.int64)
    if values.max(initial=0) > maxval:
        raise PGMParseError("pixel value exceeds maxval", r.pos)
    return values.reshape(height, width), maxval


def load_pgm(path, scale: float = 0.001) -> BinaryMask:
    """Read a graymap and binarise it: foreground where gray >= 128 (8-bit scale)."""
    values, maxval = read_pgm(path)
    return BinaryMask(values * 255 >= THRESHOLD * maxval, scale)


def write_pgm(path, gray: np.ndarray, maxval: int = 255) -> None:
    gray = np.asarray(gray)
    h, w = gray.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    Path(path).write_bytes(header + gray.astype(dtype).tobytes())


def save_pgm(mask: BinaryMask, path) -> None:
    write_pgm(path, np.where(mask.pixels, 255, 0))
