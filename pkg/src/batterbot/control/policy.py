"""Speed and pour-time regressors built on the MLP, plus their training data."""
from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..measure import measure_disk, measure_stroke_width
from ..sim import (
    BatterTruth,
    DepositionGrid,
    SurrogateParams,
    deposit_pool,
    deposit_stroke,
    spread_thickness,
)
from .mlp import MlpModel, TrainConfig, init_mlp, train

__all__ = [
    "SPEED_LIMITS",
    "TIME_LIMITS",
    "TASK_COLUMNS",
    "UntrainedModelError",
    "ExtrapolationWarning",
    "ControlModel",
    "speed_dataset",
    "time_dataset",
    "save_dataset",
    "load_dataset",
    "train_control_model",
    "predict_speed",
    "predict_pour_time",
]

SPEED_LIMITS = (0.001, 0.1)   # m/s
TIME_LIMITS = (0.5, 120.0)    # s
TASK_COLUMNS = {
    "speed": ("ratio", "width_m", "speed_mps"),
    "time": ("ratio", "diameter_m", "time_s"),
}
TRAIN_RATIOS = (1.25, 1.30, 1.35, 1.40, 1.45)


class UntrainedModelError(RuntimeError):
    pass


class ExtrapolationWarning(UserWarning):
    pass


@dataclass
class ControlModel:
    """An MLP tied to a task ('speed' or 'time') and its training input box."""

    task: str
    mlp: MlpModel
    feature_min: np.ndarray
    feature_max: np.ndarray

    def __post_init__(self):
        if self.task not in TASK_COLUMNS:
            raise ValueError(f"unknown task {self.task!r}")
        self.feature_min = np.asarray(self.feature_min, dtype=float)
        self.feature_max = np.asarray(self.feature_max, dtype=float)

    def to_dict(self) -> dict:
        d = self.mlp.to_dict()
        d["task"] = self.task
        d["feature_range"] = [self.feature_min.tolist(), self.feature_max.tolist()]
        return d

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "ControlModel":
        lo, hi = d.get("feature_range", [[-np.inf] * 2, [np.inf] * 2])
        return cls(d.get("task", "speed"), MlpModel.from_dict(d), lo, hi)

    @classmethod
    def load(cls, path) -> "ControlModel":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def predict(self, ratio: float, size: float) -> float:
        if not self.mlp.trained:
            raise UntrainedModelError(f"{self.task} model has not been trained")
        x = np.array([ratio, size], dtype=float)
        if not np.isfinite(x).all():
            raise ValueError("non-finite input")
        span = self.feature_max - self.feature_min
        if np.any(x < self.feature_min - 0.1 * span) or np.any(x > self.feature_max + 0.1 * span):
            warnings.warn(
                f"input (ratio={ratio:g}, size={size:g}) is more than 10% outside the training range",
                ExtrapolationWarning, stacklevel=3)
        return float(self.mlp(x))


# ------------------------------------------------------------------ datasets


def _line_trial(ratio, speed, params, rng, length=0.12, res=0.001):
    """Pour one straight line at ``speed`` in a random direction and measure its width."""
    ang = rng.uniform(0, math.pi)
    c = np.array([0.1, 0.1]) + rng.uniform(-0.002, 0.002, 2)
    d = 0.5 * length * np.array([math.cos(ang), math.sin(ang)])
    path = np.array([c - d, c + d])
    grid = DepositionGrid.empty(0.2, 0.2, res)
    grid = deposit_stroke(grid, path, speed, BatterTruth(ratio, 0.03), params)
    return measure_stroke_width(grid, path)[0]


def speed_dataset(params: SurrogateParams | None = None, ratios=TRAIN_RATIOS,
                  widths=np.linspace(0.008, 0.059, 12), seed: int = 0) -> np.ndarray:
    """Calibration lines: rows of (ratio, measured width, commanded speed).

    Commanded speeds are spread around the values expected to give the
    nominal widths, with +-5% jitter, and the width is measured off the
    simulated deposit.
    """
    params = params or SurrogateParams()
    rng = np.random.default_rng(seed)
    rows = []
    for r in ratios:
        tau = spread_thickness(r, params)
        for w in widths:
            v = params.flow_rate / (w * tau) * rng.uniform(0.95, 1.05)
            rows.append((r, _line_trial(r, v, params, rng), v))
    return np.array(rows)


def time_dataset(params: SurrogateParams | None = None, ratios=TRAIN_RATIOS,
                 diameters=np.linspace(0.02, 0.225, 12), seed: int = 0) -> np.ndarray:
    """Stationary pours: rows of (ratio, measured diameter, pour time)."""
    params = params or SurrogateParams()
    rng = np.random.default_rng(seed)
    rows = []
    for r in ratios:
        tau = spread_thickness(r, params)
        for dia in diameters:
            t = math.pi * (dia / 2) ** 2 * tau / params.flow_rate * rng.uniform(0.95, 1.05)
            side = dia * 1.3 + 0.01
            grid = DepositionGrid.empty(side, side, 0.001)
            grid = deposit_pool(grid, (side / 2, side / 2), params.flow_rate * t,
                                BatterTruth(r, 0.03), params)
            rows.append((r, measure_disk(grid)[1], t))
    return np.array(rows)


def save_dataset(rows, path, task: str):
    header = ",".join(TASK_COLUMNS[task])
    buf = io.StringIO()
    np.savetxt(buf, np.asarray(rows), delimiter=",", header=header, comments="", fmt="%.10g")
    Path(path).write_text(buf.getvalue())


def load_dataset(path, task: str | None = None) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty dataset")
    cols = tuple(c.strip() for c in text[0].split(","))
    if task is not None and cols != TASK_COLUMNS[task]:
        raise ValueError(f"{path}: expected columns {TASK_COLUMNS[task]}, got {cols}")
    data = np.loadtxt(io.StringIO("\n".join(text[1:])), delimiter=",", ndmin=2)
    if data.shape[1] != 3 or len(data) == 0:
        raise ValueError(f"{path}: need a non-empty three-column table")
    return data


def train_control_model(rows, task: str, config: TrainConfig | None = None,
                        layer_sizes=(2, 32, 64, 1)):
    """Fit the regressor for ``task`` on (ratio, size, target) rows.

    Returns the model and its loss history.
    """
    config = config or TrainConfig()
    rows = np.asarray(rows, dtype=float)
    X, y = rows[:, :2], rows[:, 2]
    mlp, history = train(init_mlp(layer_sizes, config.seed), X, y, config)
    return ControlModel(task, mlp, X.min(axis=0), X.max(axis=0)), history


def _check(model, task):
    if model is None:
        raise UntrainedModelError(f"no {task} model")
    if model.task != task:
        raise ValueError(f"expected a {task} model, got {model.task}")


def predict_speed(model: ControlModel, ratio: float, target_width: float) -> float:
    """Arm speed (m/s) for a line of ``target_width`` metres, clamped to [1 mm/s, 0.1 m/s]."""
    _check(model, "speed")
    return float(np.clip(model.predict(ratio, target_width), *SPEED_LIMITS))


def predict_pour_time(model: ControlModel, ratio: float, target_diameter: float) -> float:
    """Stationary pour time (s) for a disk of ``target_diameter``, clamped to [0.5, 120] s."""
    _check(model, "time")
    return float(np.clip(model.predict(ratio, target_diameter), *TIME_LIMITS))
