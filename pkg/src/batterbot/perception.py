"""Haptic estimators: uniformity stopping, liquid level, water-flour ratio,
and bowl localisation from wall contacts.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TorqueCurve",
    "UniformityMonitor",
    "LevelEstimate",
    "RatioModel",
    "WEIGHTING_MODES",
    "PerceptionError",
    "InsufficientHistory",
    "NoBatterDetected",
    "ProbeRangeTooShallow",
    "ProbeRangeTooCoarse",
    "is_uniform",
    "estimate_level",
    "default_jump_threshold",
    "fit_ratio_model",
    "estimate_ratio",
    "ratio_mse",
    "fit_circle",
    "TRIAL_PUSH_HEIGHT",
    "StirResult",
    "stir_until_uniform",
    "Perception",
    "perceive",
]

WEIGHTING_MODES = ("inverse_mse", "paper_literal")


class PerceptionError(ValueError):
    pass


class InsufficientHistory(PerceptionError):
    pass


class NoBatterDetected(PerceptionError):
    pass


class ProbeRangeTooShallow(PerceptionError):
    """Torque never flattened out: the highest push was still in batter."""


class ProbeRangeTooCoarse(PerceptionError):
    """Too few pushes landed below the surface to fit anything."""


@dataclass(frozen=True)
class TorqueCurve:
    heights: np.ndarray
    torques: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float).ravel()
        t = np.asarray(self.torques, dtype=float).ravel()
        if h.shape != t.shape:
            raise PerceptionError("heights and torques differ in length")
        if np.any(np.diff(h) <= 0):
            raise PerceptionError("tip heights must be strictly increasing")
        h.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "torques", t)

    def __len__(self):
        return len(self.heights)

    @property
    def samples(self):
        return list(zip(self.heights.tolist(), self.torques.tolist()))

    def immersion(self, level: float):
        """(depth, torque) for the pushes below ``level``."""
        below = self.heights < level
        return level - self.heights[below], self.torques[below]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tip_height_m", "torque_nm"])
            for z, t in zip(self.heights, self.torques):
                w.writerow([repr(float(z)), repr(float(t))])

    @classmethod
    def from_csv(cls, path) -> "TorqueCurve":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["tip_height_m", "torque_nm"]:
            raise PerceptionError(f"{path}: expected header 'tip_height_m,torque_nm'")
        body = [r for r in rows[1:] if r]
        try:
            data = np.array([[float(a), float(b)] for a, b in body], dtype=float).reshape(-1, 2)
        except ValueError as exc:
            raise PerceptionError(f"{path}: {exc}") from None
        return cls(data[:, 0], data[:, 1])


# ---------------------------------------------------------------- uniformity


@dataclass
class UniformityMonitor:
    """Per-trial mean push torques and the stop threshold (N*m).

    With ``threshold=None`` the threshold is fixed at ``threshold_frac`` of the
    first recorded trial.
    """

    threshold: float | None = None
    threshold_frac: float = 0.05
    trial_torques: list = field(default_factory=list)

    def __post_init__(self):
        if self.threshold is not None and not self.threshold > 0:
            raise PerceptionError("uniformity threshold must be positive")

    def record(self, torque: float) -> None:
        self.trial_torques.append(float(torque))
        if self.threshold is None:
            self.threshold = abs(self.trial_torques[0]) * self.threshold_frac
            if not self.threshold > 0:
                raise PerceptionError("first trial torque is zero; cannot set threshold")


def is_uniform(monitor: UniformityMonitor) -> bool:
    t = monitor.trial_torques
    if len(t) < 2:
        raise InsufficientHistory("need at least two uniformity trials")
    return abs(t[-1] - t[-2]) < monitor.threshold


# ---------------------------------------------------------------- liquid level


@dataclass(frozen=True)
class LevelEstimate:
    level: float
    batter_line: tuple[float, float]
    air_line: tuple[float, float]
    split_index: int


def default_jump_threshold(params) -> float:
    return 6.0 * params.sigma_air


def _line(z, t):
    slope, intercept = np.polyfit(z, t, 1)
    resid = t - (slope * z + intercept)
    return float(slope), float(intercept), float(resid @ resid)


def estimate_level(curve: TorqueCurve, jump_threshold: float) -> LevelEstimate:
    """Locate the batter surface from a torque-vs-tip-height curve.

    Pushes at the top of the sweep whose torque stays within
    ``jump_threshold`` of zero are air; the split is then refined by trying
    neighbouring split points and keeping the one with the smallest combined
    residual (ties go to the batter side). The level is where the two fitted
    lines cross.
    """
    z, t = curve.heights, curve.torques
    n = len(z)
    if n < 4:
        raise ProbeRangeTooCoarse("need at least 4 pushes to estimate the level")
    quiet = np.abs(t) <= jump_threshold
    if quiet.all():
        raise NoBatterDetected("every push read as air")
    if not quiet[-1]:
        raise ProbeRangeTooShallow("torque never drops to the air baseline")
    s = n
    while s > 0 and quiet[s - 1]:
        s -= 1
    if t[:s].max() <= jump_threshold:
        raise NoBatterDetected("no push exceeded the air threshold")
    if s < 3:
        raise ProbeRangeTooCoarse("fewer than three pushes reached the batter")

    scale = float(t @ t)
    best = None
    for k in range(s - 2, s + 2):
        if k < 2 or n - k < 2:
            continue
        bs, bi, be = _line(z[:k], t[:k])
        as_, ai, ae = _line(z[k:], t[k:])
        sse = be + ae
        if best is None or sse < best[0] - 1e-12 * scale or abs(sse - best[0]) <= 1e-12 * scale:
            best = (sse, k, (bs, bi), (as_, ai))
    if best is None:
        raise ProbeRangeTooCoarse("need at least two pushes on each side of the surface")
    _, k, (bs, bi), (as_, ai) = best
    if abs(bs - as_) < 1e-9:
        level = float(z[k])
    else:
        level = (ai - bi) / (bs - as_)
        level = float(min(max(level, z[k - 1]), z[k]))
    return LevelEstimate(level, (bs, bi), (as_, ai), k)


# ---------------------------------------------------------------- ratio


@dataclass(frozen=True)
class RatioModel:
    """Per-label torque-vs-immersion slopes (N*m per m), sorted by ratio."""

    labels: tuple
    slopes: tuple
    weighting_mode: str = "inverse_mse"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.weighting_mode not in WEIGHTING_MODES:
            raise PerceptionError(f"unknown weighting mode {self.weighting_mode!r}")
        object.__setattr__(self, "labels", tuple(float(v) for v in self.labels))
        object.__setattr__(self, "slopes", tuple(float(v) for v in self.slopes))
        if len(self.labels) != len(self.slopes):
            raise PerceptionError("labels and slopes differ in length")
        if any(b <= a for a, b in zip(self.labels, self.labels[1:])):
            raise PerceptionError("ratio labels must be distinct and sorted")

    @property
    def entries(self):
        return list(zip(self.labels, self.slopes))

    def is_monotone(self) -> bool:
        return all(b < a for a, b in zip(self.slopes, self.slopes[1:]))

    def with_mode(self, mode: str) -> "RatioModel":
        return RatioModel(self.labels, self.slopes, mode, dict(self.metadata))

    def to_json(self) -> str:
        return json.dumps(
            {
                "labels": list(self.labels),
                "slopes": list(self.slopes),
                "weighting_mode": self.weighting_mode,
                "metadata": self.metadata,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "RatioModel":
        d = json.loads(text)
        return cls(d["labels"], d["slopes"], d.get("weighting_mode", "inverse_mse"), d.get("metadata", {}))

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "RatioModel":
        return cls.from_json(Path(path).read_text())


def fit_ratio_model(training, weighting_mode="inverse_mse") -> RatioModel:
    """Fit a through-origin line in torque-vs-immersion space per ratio label.

    ``training`` is an iterable of ``(ratio_label, TorqueCurve, level)``.
    """
    fits = {}
    n_points = 0
    for label, curve, level in training:
        label = float(label)
        if label in fits:
            raise PerceptionError(f"duplicate ratio label {label}")
        d, t = curve.immersion(level)
        if d.size == 0:
            raise ProbeRangeTooCoarse(f"label {label}: no pushes below the surface")
        slope = float(d @ t / (d @ d))
        if not slope > 0:
            raise PerceptionError(f"label {label}: non-positive torque slope {slope}")
        fits[label] = slope
        n_points += len(curve)
    if len(fits) < 2:
        raise PerceptionError("need at least two distinct ratio labels")
    labels = sorted(fits)
    return RatioModel(
        labels,
        [fits[k] for k in labels],
        weighting_mode,
        {"n_curves": len(labels), "n_points": n_points, "fit": "least_squares_through_origin"},
    )


def ratio_mse(curve: TorqueCurve, level: float, model: RatioModel) -> np.ndarray:
    """Mean squared torque error of every model entry on the batter-side pushes."""
    d, t = curve.immersion(level)
    pred = np.outer(model.slopes, d)
    return ((pred - t) ** 2).mean(axis=1)


def estimate_ratio(curve: TorqueCurve, level: float, model: RatioModel, mode=None) -> float:
    """Blend the labels of the two closest fitted curves by their MSEs.

    ``inverse_mse`` weights each label by the *other* curve's error, so the
    better match dominates; ``paper_literal`` uses each curve's own error as
    its weight.
    """
    mode = mode or model.weighting_mode
    if mode not in WEIGHTING_MODES:
        raise PerceptionError(f"unknown weighting mode {mode!r}")
    if len(model.labels) < 2:
        raise PerceptionError("ratio model needs at least two entries")
    d, t = curve.immersion(level)
    if d.size < 3:
        raise ProbeRangeTooCoarse(f"only {d.size} pushes below the surface; need 3")
    mse = ratio_mse(curve, level, model)
    i1, i2 = np.argsort(mse, kind="stable")[:2]
    m1, m2 = float(mse[i1]), float(mse[i2])
    r1, r2 = model.labels[i1], model.labels[i2]
    if m1 + m2 == 0:
        return r1
    if mode == "inverse_mse":
        if m1 < 1e-12 * float(t @ t) / t.size:
            return r1
        return (m2 * r1 + m1 * r2) / (m1 + m2)
    return (m1 * r1 + m2 * r2) / (m1 + m2)


# ---------------------------------------------------------------- bowl


def fit_circle(points):
    """Algebraic (Kasa) least-squares circle through >= 3 points.

    Returns ``(center, radius)``. Points are centred before solving so the
    result does not depend on where the bowl sits in the robot frame.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
        raise PerceptionError("need at least three 2-D points")
    mean = p.mean(axis=0)
    q = p - mean
    sv = np.linalg.svd(q, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= 1e-12 * sv[0]:
        raise PerceptionError("points are collinear")
    a = np.column_stack([2 * q, np.ones(len(q))])
    b = (q**2).sum(axis=1)
    (cx, cy, c), *_ = np.linalg.lstsq(a, b, rcond=None)
    radius = math.sqrt(c + cx * cx + cy * cy)
    return mean + np.array([cx, cy]), radius


# ---------------------------------------------------------------- pipelines

TRIAL_PUSH_HEIGHT = 0.003


@dataclass
class StirResult:
    truth: object
    monitor: UniformityMonitor
    stop_trial: int


def stir_until_uniform(truth, params, rng_seed=0, threshold=None, threshold_frac=0.05,
                       trial_height=TRIAL_PUSH_HEIGHT, preliminary=True, max_trials=100) -> StirResult:
    """Preliminary 90 s mix, then quick-stir trials until the torque settles.

    Each trial is one quick-stir block followed by a single push at
    ``trial_height``; stirring stops at the first trial for which
    :func:`is_uniform` holds.
    """
    from . import sim

    rng = np.random.default_rng(rng_seed)
    if preliminary:
        truth = sim.run_preliminary_stir(truth)
    z = min(trial_height, 0.5 * truth.level)
    quick = sim.STIR_MOTIONS[sim.MotionKind.QUICK_STIR]
    monitor = UniformityMonitor(threshold=threshold, threshold_frac=threshold_frac)
    for k in range(1, max_trials + 1):
        truth = sim.apply_stir_motion(truth, quick, sim.TRIAL_STIR_SECONDS)
        monitor.record(sim.push_torques(truth, params, [z], rng)[0])
        if k >= 2 and is_uniform(monitor):
            return StirResult(truth, monitor, k)
    raise PerceptionError(f"batter not uniform after {max_trials} trials")


@dataclass(frozen=True)
class Perception:
    level: LevelEstimate
    ratio: float
    curve: TorqueCurve


def perceive(truth, params, model: RatioModel, heights=None, rng_seed=0,
             jump_threshold=None, mode=None) -> Perception:
    """Push sweep, then level and ratio estimates for a (stirred) batter."""
    from . import sim

    if heights is None:
        heights = sim.probe_heights(0.001, 0.063, 0.001)
    if jump_threshold is None:
        jump_threshold = default_jump_threshold(params)
    curve = sim.run_push_sequence(truth, params, heights, rng_seed)
    lvl = estimate_level(curve, jump_threshold)
    return Perception(lvl, estimate_ratio(curve, lvl.level, model, mode), curve)
