"""Surrogate physics for the whisk, bowl, batter, spout and griddle.

Everything in here is a pure function of its inputs plus an integer seed.
State objects are frozen dataclasses; "updating" one returns a copy.

Torque model for a single push with the whisk tip at height ``z``::

    T = kappa * exp(-beta * ratio) * (level - z) * (1 + u / tau_u) ** -alpha

for ``z < level``, zero otherwise, plus Gaussian noise.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BowlSpec",
    "BatterTruth",
    "SurrogateParams",
    "MotionKind",
    "StirMotion",
    "STIR_MOTIONS",
    "PRELIMINARY_SEQUENCE",
    "TRIAL_STIR_SECONDS",
    "DepositionGrid",
    "SMALL_BOWL",
    "LARGE_BOWL",
    "uniformity_factor",
    "clean_torque",
    "torque_for_push",
    "run_push_sequence",
    "push_torques",
    "probe_heights",
    "apply_stir_motion",
    "run_preliminary_stir",
    "probe_bowl_contact",
    "theta_start",
    "pour_flow",
    "spread_thickness",
    "stroke_width_for_speed",
    "deposit_stroke",
    "deposit_pool",
    "SpoutFrames",
    "spout_mask_sequence",
    "residual_discharge",
    "ground_truth_stop_trial",
    "SimulationError",
]


class SimulationError(ValueError):
    """Invalid input to a surrogate operation."""


@dataclass(frozen=True)
class BowlSpec:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.083
    interior_height: float = 0.07

    def __post_init__(self):
        if not self.radius > 0:
            raise SimulationError(f"bowl radius must be positive, got {self.radius}")
        if not self.interior_height > 0:
            raise SimulationError(
                f"bowl interior_height must be positive, got {self.interior_height}"
            )
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def area(self) -> float:
        """Horizontal cross-section, treating the bowl as a cylinder."""
        return math.pi * self.radius**2


SMALL_BOWL = BowlSpec(radius=0.083, interior_height=0.07)
LARGE_BOWL = BowlSpec(radius=0.105, interior_height=0.075)


@dataclass(frozen=True)
class BatterTruth:
    """Hidden state of the batter. ``stir_progress`` is effective stirring seconds."""

    ratio: float
    level: float
    stir_progress: float = 0.0
    bowl: BowlSpec = SMALL_BOWL

    def __post_init__(self):
        if not 0.8 <= self.ratio <= 2.0:
            raise SimulationError(f"water-flour ratio {self.ratio} outside [0.8, 2.0]")
        if not 0 < self.level <= self.bowl.interior_height:
            raise SimulationError(
                f"level {self.level} m outside (0, {self.bowl.interior_height}]"
            )
        if self.stir_progress < 0:
            raise SimulationError("stir_progress must be >= 0")

    def replace(self, **changes) -> "BatterTruth":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SurrogateParams:
    """Free constants of the surrogate.

    ``sigma_batter_rel`` is a fraction of the batter's full-immersion torque
    (tip on the bowl floor); ``sigma_air`` is absolute, in N*m.
    ``residual_volume`` is the wall-film volume that drains during a long
    static hold (used by the fixed-angle pouring baseline).
    """

    kappa: float = 1.2
    beta: float = 1.5
    tau_u: float = 120.0
    alpha: float = 0.35
    sigma_batter_rel: float = 0.002
    sigma_air: float = 1e-5
    thickness0: float = 0.003
    gamma: float = 0.8
    flow_rate: float = 1e-6
    theta_max: float = 1.2
    c_theta: float = 10.0
    residual_volume: float = 5e-6

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise SimulationError(f"surrogate parameter {f.name} must be positive, got {value!r}")
        if self.theta_max > math.pi / 2:
            raise SimulationError("theta_max must not exceed pi/2")

    def replace(self, **changes) -> "SurrogateParams":
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------- torque


def uniformity_factor(stir_progress: float, params: SurrogateParams) -> float:
    return (1.0 + stir_progress / params.tau_u) ** (-params.alpha)


def clean_torque(truth: BatterTruth, params: SurrogateParams, tip_height) -> np.ndarray:
    """Noise-free push torque; vectorised over ``tip_height``."""
    z = np.asarray(tip_height, dtype=float)
    depth = np.clip(truth.level - z, 0.0, None)
    scale = params.kappa * math.exp(-params.beta * truth.ratio)
    return scale * depth * uniformity_factor(truth.stir_progress, params)


def _full_torque(truth, params):
    return float(clean_torque(truth, params, 0.0))


def push_torques(truth, params, heights, rng, noise=True) -> np.ndarray:
    """Vectorised pushes drawing noise from an existing Generator."""
    heights = np.asarray(heights, dtype=float)
    if np.any(heights < 0):
        raise SimulationError("tip_height must be >= 0")
    torque = clean_torque(truth, params, heights)
    if not noise:
        return torque
    in_batter = heights < truth.level
    sigma = np.where(
        in_batter, params.sigma_batter_rel * _full_torque(truth, params), params.sigma_air
    )
    return torque + sigma * rng.standard_normal(heights.shape)


def torque_for_push(truth, params, tip_height, rng_seed=0, noise=True) -> float:
    """Mean resistance torque (N*m) of one 5 cm push at ``tip_height`` metres."""
    rng = np.random.default_rng(rng_seed)
    return float(push_torques(truth, params, [tip_height], rng, noise)[0])


def run_push_sequence(truth, params, heights, rng_seed=0, noise=True):
    """Push at each height in turn and return a :class:`TorqueCurve`."""
    from .perception import TorqueCurve

    heights = np.asarray(heights, dtype=float)
    if heights.size == 0:
        raise SimulationError("empty height list")
    if heights.ndim != 1 or np.any(np.diff(heights) <= 0):
        raise SimulationError("heights must be strictly increasing")
    rng = np.random.default_rng(rng_seed)
    return TorqueCurve(heights, push_torques(truth, params, heights, rng, noise))


def probe_heights(start=0.003, stop=0.063, step=0.003) -> np.ndarray:
    """Inclusive arithmetic grid of tip heights in metres."""
    n = int(round((stop - start) / step)) + 1
    return start + step * np.arange(n)


# ---------------------------------------------------------------- stirring


class MotionKind(str, enum.Enum):
    QUICK_STIR = "QuickStir"
    FINE_STIR = "FineStir"
    EDGE_SCRAPE = "EdgeScrape"
    WHISK_SHAKE = "WhiskShake"


@dataclass(frozen=True)
class StirMotion:
    """One stirring primitive.

    Depth is ``level - depth_offset``; the circle radius is
    ``bowl.radius + radius_offset`` (None for shaking, which is a linear
    back-and-forth).
    """

    kind: MotionKind
    speed: float
    speed_unit: str
    depth_offset: float
    radius_offset: float | None
    rotation: bool
    uniformity_rate: float

    def with_rate(self, rate: float) -> "StirMotion":
        return dataclasses.replace(self, uniformity_rate=rate)


STIR_MOTIONS = {
    MotionKind.QUICK_STIR: StirMotion(MotionKind.QUICK_STIR, 15.7, "rad/s", 0.002, -0.002, False, 1.0),
    MotionKind.FINE_STIR: StirMotion(MotionKind.FINE_STIR, 6.28, "rad/s", 0.005, 0.0, True, 0.5),
    MotionKind.EDGE_SCRAPE: StirMotion(MotionKind.EDGE_SCRAPE, 3.14, "rad/s", 0.015, 0.002, True, 0.3),
    MotionKind.WHISK_SHAKE: StirMotion(MotionKind.WHISK_SHAKE, 8.0, "Hz", 0.005, None, False, 0.4),
}

# 90 s preliminary phase, in execution order.
PRELIMINARY_SEQUENCE = (
    (MotionKind.QUICK_STIR, 22.5),
    (MotionKind.EDGE_SCRAPE, 22.5),
    (MotionKind.FINE_STIR, 22.5),
    (MotionKind.WHISK_SHAKE, 22.5),
)

# Wall time of 50 quick-stir rounds including the push that follows.
TRIAL_STIR_SECONDS = 40.0


def apply_stir_motion(truth: BatterTruth, motion: StirMotion, duration: float) -> BatterTruth:
    if not duration > 0:
        raise SimulationError(f"stir duration must be positive, got {duration}")
    if motion.uniformity_rate == 0:
        return truth
    return truth.replace(stir_progress=truth.stir_progress + duration * motion.uniformity_rate)


def run_preliminary_stir(truth: BatterTruth, sequence=PRELIMINARY_SEQUENCE) -> BatterTruth:
    for kind, seconds in sequence:
        truth = apply_stir_motion(truth, STIR_MOTIONS[kind], seconds)
    return truth


# ---------------------------------------------------------------- bowl probing


def probe_bowl_contact(bowl: BowlSpec, start, direction) -> np.ndarray:
    """Where a whisk moving from ``start`` along ``direction`` first hits the wall.

    The real robot stops once the lateral force exceeds 5 N; in the surrogate
    the wall is rigid so that happens exactly at the ray-circle intersection.
    """
    p = np.asarray(start, dtype=float)
    d = np.asarray(direction, dtype=float)
    norm = np.hypot(*d)
    if norm == 0:
        raise SimulationError("direction must be non-zero")
    d = d / norm
    c = np.asarray(bowl.center)
    rel = p - c
    cc = rel @ rel - bowl.radius**2
    if cc >= 0:
        raise SimulationError("probe start must lie strictly inside the bowl")
    b = rel @ d
    t = -b + math.sqrt(b * b - cc)
    hit = p + t * d
    # snap onto the circle; removes the last ulp of drift
    offset = hit - c
    return c + offset * (bowl.radius / np.hypot(*offset))


# ---------------------------------------------------------------- pouring


def theta_start(level: float, params: SurrogateParams) -> float:
    """Tilt angle (rad) at which batter reaches the spout lip."""
    return params.theta_max - params.c_theta * level


def pour_flow(angle: float, truth: BatterTruth, params: SurrogateParams) -> float:
    if not 0 <= angle <= math.pi / 2:
        raise SimulationError(f"tilt angle {angle} outside [0, pi/2]")
    return params.flow_rate if angle >= theta_start(truth.level, params) else 0.0


def residual_discharge(truth: BatterTruth, params: SurrogateParams) -> float:
    """Extra volume draining off the bowl wall during a long static hold.

    Thicker batter (lower ratio) clings more.
    """
    return params.residual_volume * math.exp(-params.beta * (truth.ratio - 1.0))


def spread_thickness(ratio: float, params: SurrogateParams) -> float:
    return params.thickness0 * math.exp(-params.gamma * (ratio - 1.0))


def stroke_width_for_speed(speed, ratio, params: SurrogateParams):
    """Deposited line width for a given arm speed: ``Q / (v * thickness)``."""
    return params.flow_rate / (np.asarray(speed) * spread_thickness(ratio, params))


@dataclass
class DepositionGrid:
    """Virtual griddle.

    ``cells[i, j]`` holds batter thickness (m) for the cell centred at
    ``origin + resolution * (j + 0.5, i + 0.5)``.
    """

    resolution: float
    cells: np.ndarray
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.resolution > 0:
            raise SimulationError("grid resolution must be positive")
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.ndim != 2:
            raise SimulationError("grid cells must be 2-D")
        if np.any(self.cells < 0):
            raise SimulationError("grid thickness must be non-negative")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @classmethod
    def empty(cls, width: float, height: float, resolution: float = 0.001, origin=(0.0, 0.0)):
        shape = (int(math.ceil(height / resolution)), int(math.ceil(width / resolution)))
        return cls(resolution, np.zeros(shape), origin)

    @classmethod
    def for_mask(cls, shape, scale: float, plate_origin=(0.0, 0.0)):
        """Grid whose cell (i, j) is centred on pixel (row i, col j) of a mask."""
        half = 0.5 * scale
        return cls(scale, np.zeros(shape), (plate_origin[0] - half, plate_origin[1] - half))

    def copy(self) -> "DepositionGrid":
        return DepositionGrid(self.resolution, self.cells.copy(), self.origin)

    @property
    def volume(self) -> float:
        return float(self.cells.sum() * self.resolution**2)

    def cell_centers(self, rows: slice, cols: slice):
        r0, c0 = rows.start, cols.start
        ys = self.origin[1] + self.resolution * (np.arange(r0, rows.stop) + 0.5)
        xs = self.origin[0] + self.resolution * (np.arange(c0, cols.stop) + 0.5)
        return xs, ys

    def index_window(self, lo, hi):
        """Row/column slices covering the world box [lo, hi], clipped to the grid."""
        res = self.resolution
        h, w = self.cells.shape
        c0 = max(int(math.floor((lo[0] - self.origin[0]) / res)), 0)
        c1 = min(int(math.ceil((hi[0] - self.origin[0]) / res)) + 1, w)
        r0 = max(int(math.floor((lo[1] - self.origin[1]) / res)), 0)
        r1 = min(int(math.ceil((hi[1] - self.origin[1]) / res)) + 1, h)
        return slice(r0, max(r1, r0)), slice(c0, max(c1, c0))

    def to_pgm_gray(self, full_scale: float = 0.005) -> np.ndarray:
        """8-bit rendering: gray = 255 * thickness / full_scale, saturating."""
        return np.clip(np.rint(self.cells / full_scale * 255.0), 0, 255).astype(np.uint8)


def _segment_distance(xs, ys, a, b):
    """Distance from every (x, y) grid point to segment ab."""
    px = xs[None, :] - a[0]
    py = ys[:, None] - a[1]
    d = b - a
    ll = d @ d
    if ll == 0:
        return np.hypot(px, py)
    t = np.clip((px * d[0] + py * d[1]) / ll, 0.0, 1.0)
    return np.hypot(px - t * d[0], py - t * d[1])


def _stamp(grid: DepositionGrid, footprint, window, volume):
    rows, cols = window
    n = int(footprint.sum())
    if n == 0:
        raise SimulationError("deposit footprint is empty")
    thickness = volume / (n * grid.resolution**2)
    grid.cells[rows, cols] += np.where(footprint, thickness, 0.0)


def _nearest_cell_footprint(grid, point):
    res = grid.resolution
    h, w = grid.cells.shape
    j = int(math.floor((point[0] - grid.origin[0]) / res))
    i = int(math.floor((point[1] - grid.origin[1]) / res))
    if not (0 <= i < h and 0 <= j < w):
        raise SimulationError("deposit lies outside the grid")
    return np.ones((1, 1), bool), (slice(i, i + 1), slice(j, j + 1))


def deposit_stroke(grid: DepositionGrid, path, speed: float, truth: BatterTruth,
                   params: SurrogateParams) -> DepositionGrid:
    """Pour along a polyline at constant arm speed and return the new grid.

    The swath is the set of cells whose centres lie within ``w / 2`` of the
    path, ``w = Q / (speed * thickness(ratio))``. Cells covered several times
    by the same stroke count once. Thickness inside the swath is set so that
    the stroke adds exactly ``Q * length / speed`` of batter; the rounded end
    caps therefore make it slightly thinner than ``thickness(ratio)``.
    """
    if not speed > 0:
        raise SimulationError(f"arm speed must be positive, got {speed}")
    pts = np.asarray(path, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise SimulationError("a stroke needs at least two points")
    seg = np.diff(pts, axis=0)
    length = float(np.hypot(seg[:, 0], seg[:, 1]).sum())
    volume = params.flow_rate * length / speed
    half = 0.5 * float(stroke_width_for_speed(speed, truth.ratio, params))

    out = grid.copy()
    lo = pts.min(axis=0) - half
    hi = pts.max(axis=0) + half
    window = out.index_window(lo, hi)
    rows, cols = window
    if rows.stop <= rows.start or cols.stop <= cols.start:
        raise SimulationError("stroke lies outside the grid")
    xs, ys = out.cell_centers(rows, cols)
    footprint = np.zeros((len(ys), len(xs)), dtype=bool)
    for a, b in zip(pts[:-1], pts[1:]):
        sub_r = np.nonzero((ys >= min(a[1], b[1]) - half) & (ys <= max(a[1], b[1]) + half))[0]
        sub_c = np.nonzero((xs >= min(a[0], b[0]) - half) & (xs <= max(a[0], b[0]) + half))[0]
        if sub_r.size == 0 or sub_c.size == 0:
            continue
        rs = slice(sub_r[0], sub_r[-1] + 1)
        cs = slice(sub_c[0], sub_c[-1] + 1)
        footprint[rs, cs] |= _segment_distance(xs[cs], ys[rs], a, b) <= half
    if volume == 0:
        return out
    if not footprint.any():
        footprint, window = _nearest_cell_footprint(out, pts[0])
    _stamp(out, footprint, window, volume)
    return out


def deposit_pool(grid: DepositionGrid, center, volume: float, truth: BatterTruth,
                 params: SurrogateParams) -> DepositionGrid:
    """Stationary pour: a disk of radius ``sqrt(V / (pi * thickness))``."""
    if volume < 0:
        raise SimulationError("volume must be non-negative")
    out = grid.copy()
    if volume == 0:
        return out
    c = np.asarray(center, dtype=float)
    radius = math.sqrt(volume / (math.pi * spread_thickness(truth.ratio, params)))
    window = out.index_window(c - radius, c + radius)
    rows, cols = window
    xs, ys = out.cell_centers(rows, cols)
    footprint = np.hypot(xs[None, :] - c[0], ys[:, None] - c[1]) <= radius
    if not footprint.any():
        footprint, window = _nearest_cell_footprint(out, c)
    _stamp(out, footprint, window, volume)
    return out


# ---------------------------------------------------------------- spout camera


@dataclass(frozen=True)
class SpoutFrames:
    """Synthetic spout camera output plus the generator's own event frames."""

    masks: list
    extents: np.ndarray
    flow_start: int | None
    spout_end: int | None


def spout_mask_sequence(angle_profile, level: float, params: SurrogateParams, rng_seed=0,
                        shape=(96, 64), spout_length_px: int = 24) -> SpoutFrames:
    """Binary batter masks seen by the overhead camera while tilting.

    Before the tilt reaches ``theta_start(level)`` only the pool at the spout
    root is visible, with a fixed vertical extent. From that frame on the
    batter front advances 3-5 px per frame down the spout until it reaches the
    tip, after which the extent stays put.
    """
    angles = np.asarray(angle_profile, dtype=float)
    if np.any(np.diff(angles) < 0):
        raise SimulationError("angle profile must be nondecreasing")
    rng = np.random.default_rng(rng_seed)
    h, w = shape
    pool_top = int(rng.integers(4, 10))
    pool_extent = int(rng.integers(8, 14))
    pool_left = int(rng.integers(4, w - 30))
    pool_width = int(rng.integers(14, 22))
    stream_width = int(rng.integers(3, 7))
    advance = int(rng.integers(3, 6))
    stream_left = pool_left + (pool_width - stream_width) // 2
    if pool_top + pool_extent + spout_length_px + 1 > h:
        raise SimulationError("frame too short for the spout")

    threshold = theta_start(level, params)
    masks, extents = [], []
    flow_start = spout_end = None
    front = 0
    for f, angle in enumerate(angles):
        if angle >= threshold:
            if flow_start is None:
                flow_start = f
            if front < spout_length_px:
                front = min(spout_length_px, front + advance)
                if front == spout_length_px:
                    spout_end = f
        m = np.zeros(shape, dtype=bool)
        bottom = pool_top + pool_extent
        m[pool_top:bottom + 1, pool_left:pool_left + pool_width] = True
        if front:
            m[bottom + 1:bottom + 1 + front, stream_left:stream_left + stream_width] = True
        # ragged pool sides; never touches the top/bottom rows so extents are exact
        jag = rng.integers(0, 3, size=pool_extent - 1)
        for k, cut in enumerate(jag):
            m[pool_top + 1 + k, pool_left:pool_left + cut] = False
        masks.append(m)
        rows = np.nonzero(m.any(axis=1))[0]
        extents.append(int(rows[-1] - rows[0]))
    return SpoutFrames(masks, np.array(extents), flow_start, spout_end)


def ground_truth_stop_trial(truth: BatterTruth, params: SurrogateParams,
                            threshold_frac: float = 0.05, max_trials: int = 1000) -> int:
    """First trial whose noise-free torque change falls below the threshold.

    ``truth`` is the batter right before the first perceptive trial. Trials
    are numbered from 1; the answer is always >= 2.
    """
    quick = STIR_MOTIONS[MotionKind.QUICK_STIR]
    u = truth.stir_progress + TRIAL_STIR_SECONDS * quick.uniformity_rate * np.arange(1, max_trials + 1)
    factor = (1.0 + u / params.tau_u) ** (-params.alpha)
    drops = -np.diff(factor)
    hit = np.nonzero(drops < threshold_frac * factor[0])[0]
    if hit.size == 0:
        raise SimulationError("uniformity threshold not reached")
    return int(hit[0]) + 2
