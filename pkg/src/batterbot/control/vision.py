"""Spout camera processing: k-means segmentation, drip detection, pour start."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim import SimulationError, SurrogateParams, spout_mask_sequence, theta_start

__all__ = [
    "NoFlowDetected",
    "PourStartError",
    "KMeansResult",
    "kmeans",
    "segment_batter",
    "mask_extents",
    "detect_drip",
    "TILT_RATE",
    "initial_angle",
    "PourStart",
    "start_pour",
]

TILT_RATE = 0.007  # rad/s
FRAME_RATE = 10.0  # camera frames per second
GROWTH_PX = 2
PLATEAU_FRAMES = 3


class NoFlowDetected(RuntimeError):
    pass


class PourStartError(RuntimeError):
    pass


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: np.ndarray  # one value per Lloyd iteration, plus the seeding

    def __iter__(self):
        return iter((self.labels, self.centroids))


def _sq_dist(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans(points, k: int, max_iters: int = 100, seed: int = 0) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(X) < k:
        raise ValueError(f"k={k} exceeds the number of points ({len(X)})")
    rng = np.random.default_rng(seed)
    C = np.empty((k, X.shape[1]))
    C[0] = X[rng.integers(len(X))]
    d2 = _sq_dist(X, C[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        idx = rng.choice(len(X), p=d2 / total) if total > 0 else rng.integers(len(X))
        C[j] = X[idx]
        d2 = np.minimum(d2, _sq_dist(X, C[j:j + 1]).ravel())

    D = _sq_dist(X, C)
    labels = D.argmin(axis=1)
    inertia = [float(D[np.arange(len(X)), labels].sum())]
    for _ in range(max_iters):
        for j in range(k):
            members = labels == j
            if members.any():
                C[j] = X[members].mean(axis=0)
        D = _sq_dist(X, C)
        new = D.argmin(axis=1)
        inertia.append(float(D[np.arange(len(X)), new].sum()))
        if np.array_equal(new, labels):
            break
        labels = new
    return KMeansResult(labels, C, np.array(inertia))


def segment_batter(image, k: int = 2, seed: int = 0) -> np.ndarray:
    """Binary batter mask from a colour or gray frame: the brightest cluster."""
    img = np.asarray(image, dtype=float)
    feats = img.reshape(-1, img.shape[2]) if img.ndim == 3 else img.reshape(-1, 1)
    res = kmeans(feats, k, seed=seed)
    bright = int(np.argmax(res.centroids.sum(axis=1)))
    return (res.labels == bright).reshape(img.shape[:2])


def mask_extents(masks) -> np.ndarray:
    """Vertical extent (max row - min row) of each mask; 0 when empty."""
    out = []
    for m in masks:
        rows = np.nonzero(np.asarray(m, dtype=bool).any(axis=1))[0]
        out.append(int(rows[-1] - rows[0]) if rows.size else 0)
    return np.array(out, dtype=int)


def _plateau_start(ext, first, length=PLATEAU_FRAMES, growth=GROWTH_PX):
    for f in range(first, len(ext) - length + 1):
        if np.all(np.abs(ext[f + 1:f + length] - ext[f]) < growth):
            return f
    return None


def detect_drip(mask_sequence, extents=None):
    """Frames where batter starts down the spout and where it reaches the tip.

    The baseline is the median extent of all earlier frames. Flow starts at
    the first frame exceeding it by at least 2 px; the spout end is the first
    later frame that opens a run of 3 frames changing by less than 2 px.

    Returns
    -------
    (flow_start, spout_end)
        ``spout_end`` is None when the sequence ends before a plateau.
    """
    ext = mask_extents(mask_sequence) if extents is None else np.asarray(extents, dtype=float)
    if len(ext) < 3:
        raise ValueError("need at least 3 frames")
    flow = None
    for f in range(1, len(ext)):
        if ext[f] >= np.median(ext[:f]) + GROWTH_PX:
            flow = f
            break
    if flow is None:
        raise NoFlowDetected("batter extent never grew")
    return flow, _plateau_start(ext, flow + 1)


def initial_angle(level: float, params: SurrogateParams, margin: float = 0.05) -> float:
    """Deliberately low starting tilt for a batter surface at ``level``."""
    if not level > 0:
        raise ValueError("level must be positive")
    return max(0.0, theta_start(level, params) - margin)


@dataclass(frozen=True)
class PourStart:
    theta0: float
    flow_frame: int
    start_frame: int
    angle: float       # tilt when arm motion begins
    time: float        # seconds after reaching theta0


def start_pour(level: float, params: SurrogateParams, rng_seed: int = 0, margin: float = 0.05,
               frame_rate: float = FRAME_RATE, tilt_rate: float = TILT_RATE) -> PourStart:
    """Tilt from the initial angle while watching the spout; begin motion at the tip.

    Frames are generated on the fly and the detector only sees frames up to
    the current one. Motion starts once a plateau is confirmed; the reported
    angle is the tilt at the plateau's first frame.
    """
    theta0 = initial_angle(level, params, margin)
    dtheta = tilt_rate / frame_rate
    n_max = int(np.ceil((params.theta_max - theta0) / dtheta)) + PLATEAU_FRAMES + 1
    angles = np.minimum(theta0 + dtheta * np.arange(n_max), np.pi / 2)
    try:
        frames = spout_mask_sequence(angles, level, params, rng_seed=rng_seed)
    except SimulationError as exc:
        raise PourStartError(str(exc)) from None
    ext = mask_extents(frames.masks)
    for n in range(3, len(ext) + 1):
        try:
            flow, end = detect_drip(None, extents=ext[:n])
        except NoFlowDetected:
            continue
        if end is not None:
            return PourStart(theta0, flow, end, float(angles[end]), end / frame_rate)
    raise PourStartError("no drip detected before the maximum tilt")
