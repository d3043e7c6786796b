"""Simulated re-runs of the line, round and perception experiments."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import sim
from .control.policy import ControlModel, UntrainedModelError, predict_pour_time, predict_speed
from .measure import MeasurementError, deposit_mask, measure_disk, measure_stroke_width
from .perception import (
    RatioModel,
    TorqueCurve,
    default_jump_threshold,
    estimate_level,
    fit_ratio_model,
    perceive,
    stir_until_uniform,
)

__all__ = [
    "MeasurementError",
    "measure_stroke_width",
    "measure_disk",
    "Row",
    "ExperimentReport",
    "cell_seed",
    "training_level",
    "ratio_training_data",
    "train_ratio_model",
    "simple_speed",
    "simple_reference_speed",
    "baseline_round_volume",
    "run_line_experiment",
    "run_round_experiment",
    "run_perception_experiment",
    "iou",
    "simulate_pour",
]

LINE_RATIOS = tuple(np.round(np.linspace(1.25, 1.45, 5), 4))
LINE_WIDTHS = (0.01, 0.02, 0.03, 0.04)
ROUND_DIAMETERS = (0.05, 0.10, 0.15, 0.20)
TRAINING_RATIOS = tuple(np.round(np.arange(11) * 0.05 + 1.0, 4))
NOMINAL_RATIO = 1.35


@dataclass(frozen=True)
class Row:
    method: str
    ratio: float
    target: float
    measured: float
    group: str = ""

    @property
    def abs_error(self) -> float:
        return abs(self.measured - self.target)

    @property
    def pct_error(self) -> float:
        return self.abs_error / abs(self.target)


@dataclass
class ExperimentReport:
    """Per-cell results plus aggregates per (method, group).

    ``variance`` is the spread of measured values within each target group,
    reported as a standard deviation and averaged over groups;
    ``pct_variance`` divides each group's spread by its target first.
    """

    experiment: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def methods(self) -> list:
        return sorted({(r.method, r.group) for r in self.rows})

    def select(self, method: str, group: str | None = None) -> list:
        return [r for r in self.rows if r.method == method and (group is None or r.group == group)]

    def aggregates(self) -> dict:
        out = {}
        for method, group in self.methods():
            rows = self.select(method, group)
            by_target: dict[float, list] = {}
            for r in rows:
                by_target.setdefault(r.target, []).append(r.measured)
            spread = [float(np.std(v)) for v in by_target.values()]
            pct_spread = [float(np.std(v)) / abs(t) for t, v in by_target.items()]
            key = f"{method}/{group}" if group else method
            out[key] = {
                "n": len(rows),
                "mean_error": float(np.mean([r.abs_error for r in rows])),
                "mean_pct_error": float(np.mean([r.pct_error for r in rows])),
                "variance": float(np.mean(spread)),
                "pct_variance": float(np.mean(pct_spread)),
            }
        return out

    def aggregate(self, method: str, group: str = "") -> dict:
        return self.aggregates()[f"{method}/{group}" if group else method]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "group", "ratio", "target", "measured", "abs_error", "pct_error"])
        for r in self.rows:
            w.writerow([r.method, r.group, repr(r.ratio), repr(r.target), repr(r.measured),
                        repr(r.abs_error), repr(r.pct_error)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "meta": self.meta,
            "aggregates": self.aggregates(),
            "rows": [dict(asdict(r), abs_error=r.abs_error, pct_error=r.pct_error) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        rows = [Row(r["method"], r["ratio"], r["target"], r["measured"], r.get("group", ""))
                for r in d["rows"]]
        return cls(d["experiment"], rows, d.get("meta", {}))

    def write(self, out_dir, stem: str | None = None):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.experiment
        (out / f"{stem}.csv").write_text(self.to_csv())
        (out / f"{stem}.json").write_text(self.to_json() + "\n")
        return out / f"{stem}.csv", out / f"{stem}.json"


def cell_seed(seed: int, *keys: int) -> int:
    """Independent, reproducible seed for one experiment cell."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


# --------------------------------------------------------------- perception


def training_level(ratio: float, bowl: sim.BowlSpec = sim.SMALL_BOWL, water: float = 300e-6) -> float:
    """Surface height of a batch mixed from ``water`` m^3 of water at this ratio.

    Flour volume is taken as water / (1.5 r).
    """
    return water * (1.0 + 1.0 / (1.5 * ratio)) / bowl.area


def ratio_training_data(params: sim.SurrogateParams, ratios=TRAINING_RATIOS, heights=None,
                        seed: int = 0, bowl: sim.BowlSpec = sim.SMALL_BOWL):
    """One stirred batch per ratio, probed over ``heights``.

    Returns a list of ``(label, TorqueCurve, estimated level)``.
    """
    heights = sim.probe_heights() if heights is None else np.asarray(heights, dtype=float)
    out = []
    for i, r in enumerate(ratios):
        s = cell_seed(seed, 1, i)
        truth = sim.BatterTruth(float(r), training_level(r, bowl), bowl=bowl)
        stirred = stir_until_uniform(truth, params, rng_seed=s).truth
        curve = sim.run_push_sequence(stirred, params, heights, rng_seed=s + 1)
        level = estimate_level(curve, default_jump_threshold(params)).level
        out.append((float(r), curve, level))
    return out


def train_ratio_model(params: sim.SurrogateParams, seed: int = 0, mode: str = "inverse_mse",
                      **kwargs) -> RatioModel:
    return fit_ratio_model(ratio_training_data(params, seed=seed, **kwargs), mode)


def run_perception_experiment(model: RatioModel, n_small: int = 10, n_large: int = 5, seed: int = 0,
                              params: sim.SurrogateParams | None = None) -> ExperimentReport:
    """Random batters in both bowls through stirring, level and ratio estimation.

    Rows carry method ``level`` (metres), ``ratio`` and ``stop_trial``
    (observed against brute-force ground truth), grouped by bowl.
    """
    params = params or sim.SurrogateParams()
    rows = []
    runs = [("small", sim.SMALL_BOWL)] * n_small + [("large", sim.LARGE_BOWL)] * n_large
    for i, (name, bowl) in enumerate(runs):
        rng = np.random.default_rng(cell_seed(seed, 3, i))
        truth = sim.BatterTruth(float(rng.uniform(1.0, 1.5)), float(rng.uniform(0.005, 0.055)),
                                bowl=bowl)
        s = int(rng.integers(2**31))
        stirred = stir_until_uniform(truth, params, rng_seed=s)
        expected = sim.ground_truth_stop_trial(sim.run_preliminary_stir(truth), params)
        p = perceive(stirred.truth, params, model, rng_seed=s + 1)
        rows += [
            Row("level", truth.ratio, truth.level, p.level.level, name),
            Row("ratio", truth.ratio, truth.ratio, p.ratio, name),
            Row("stop_trial", truth.ratio, float(expected), float(stirred.stop_trial), name),
        ]
    return ExperimentReport("perception", rows, {"seed": seed, "n_small": n_small, "n_large": n_large})


# --------------------------------------------------------------- line strokes


def simple_reference_speed(params: sim.SurrogateParams, ratios=LINE_RATIOS,
                           reference_width: float = 0.01) -> float:
    """Speed the ratio-blind baseline uses for a 1 cm line: the average over ``ratios``."""
    return float(np.mean([params.flow_rate / (reference_width * sim.spread_thickness(r, params))
                          for r in ratios]))


def simple_speed(width: float, v_ref: float, law: str = "inverse", reference_width: float = 0.01):
    """Ratio-blind speed scaled from the 1 cm reference.

    ``inverse`` slows down for wider lines (width ~ 1 / speed);
    ``linear`` scales speed proportionally with width.
    """
    if law == "inverse":
        return v_ref * reference_width / width
    if law == "linear":
        return v_ref * width / reference_width
    raise ValueError(f"unknown law {law!r}")


def _line_cell(ratio, width, speed, params, rng, length):
    ang = rng.uniform(0, math.pi)
    c = np.array([0.11, 0.11]) + rng.uniform(-0.002, 0.002, 2)
    d = 0.5 * length * np.array([math.cos(ang), math.sin(ang)])
    path = np.array([c - d, c + d])
    grid = sim.DepositionGrid.empty(0.22, 0.22, 0.001)
    grid = sim.deposit_stroke(grid, path, speed, sim.BatterTruth(ratio, 0.03), params)
    return measure_stroke_width(grid, path)[0]


def _perceived_ratio(ratio, model, params, rng, bowl=sim.SMALL_BOWL):
    truth = sim.BatterTruth(float(ratio), float(rng.uniform(0.02, 0.05)), bowl=bowl)
    s = int(rng.integers(2**31))
    stirred = stir_until_uniform(truth, params, rng_seed=s)
    return perceive(stirred.truth, params, model, rng_seed=s + 1).ratio


def run_line_experiment(speed_model: ControlModel | None, ratios=LINE_RATIOS, widths=LINE_WIDTHS,
                        methods=("ours", "simple"), seed: int = 0,
                        params: sim.SurrogateParams | None = None,
                        ratio_model: RatioModel | None = None, length: float = 0.15,
                        simple_law: str = "inverse") -> ExperimentReport:
    """Straight 15 cm lines for every (method, ratio, width).

    ``ours`` commands the learned speed for the batter's ratio, perceived
    through the torque pipeline when ``ratio_model`` is given; ``simple``
    ignores the ratio. Targets and measurements are widths in metres.
    """
    params = params or sim.SurrogateParams()
    if "ours" in methods and (speed_model is None or not speed_model.mlp.trained):
        raise UntrainedModelError("the line experiment needs a trained speed model")
    v_ref = simple_reference_speed(params)
    rows = []
    for mi, method in enumerate(methods):
        for ri, r in enumerate(ratios):
            rng = np.random.default_rng(cell_seed(seed, 5, ri))
            r_used = _perceived_ratio(r, ratio_model, params, rng) if ratio_model else r
            for wi, w in enumerate(widths):
                cell = np.random.default_rng(cell_seed(seed, 7, mi, ri, wi))
                if method == "ours":
                    v = predict_speed(speed_model, r_used, w)
                elif method == "simple":
                    v = simple_speed(w, v_ref, simple_law)
                else:
                    raise ValueError(f"unknown method {method!r}")
                rows.append(Row(method, float(r), float(w), _line_cell(r, w, v, params, cell, length)))
    meta = {"seed": seed, "length_m": length, "simple_law": simple_law,
            "perceived_ratio": ratio_model is not None}
    return ExperimentReport("lines", rows, meta)


# --------------------------------------------------------------- round shapes


def baseline_round_volume(diameter: float, truth: sim.BatterTruth, params: sim.SurrogateParams,
                          nominal_ratio: float = NOMINAL_RATIO) -> float:
    """Batter released by the tilt-and-hold baseline.

    The final angle is chosen to release the disk volume for a nominal
    batter, and holding it for 30 s lets the wall film drain on top.
    """
    target = math.pi * (diameter / 2) ** 2 * sim.spread_thickness(nominal_ratio, params)
    return target + sim.residual_discharge(truth, params)


def _round_cell(volume, ratio, params, diameter):
    side = diameter * 1.6 + 0.02
    grid = sim.DepositionGrid.empty(side, side, 0.001)
    grid = sim.deposit_pool(grid, (side / 2, side / 2), volume, sim.BatterTruth(ratio, 0.03), params)
    return measure_disk(grid)[0]


def run_round_experiment(time_model: ControlModel | None, ratios=LINE_RATIOS,
                         diameters=ROUND_DIAMETERS, methods=("ours", "baseline"), seed: int = 0,
                         params: sim.SurrogateParams | None = None,
                         ratio_model: RatioModel | None = None) -> ExperimentReport:
    """Stationary pours for every (method, ratio, diameter); targets are areas in m^2."""
    params = params or sim.SurrogateParams()
    if "ours" in methods and (time_model is None or not time_model.mlp.trained):
        raise UntrainedModelError("the round experiment needs a trained time model")
    rows = []
    for mi, method in enumerate(methods):
        for ri, r in enumerate(ratios):
            rng = np.random.default_rng(cell_seed(seed, 5, ri))
            r_used = _perceived_ratio(r, ratio_model, params, rng) if ratio_model else r
            truth = sim.BatterTruth(float(r), 0.03)
            for d in diameters:
                if method == "ours":
                    volume = params.flow_rate * predict_pour_time(time_model, r_used, d)
                elif method == "baseline":
                    volume = baseline_round_volume(d, truth, params)
                else:
                    raise ValueError(f"unknown method {method!r}")
                area = math.pi * (d / 2) ** 2
                rows.append(Row(method, float(r), area, _round_cell(volume, r, params, d)))
    meta = {"seed": seed, "perceived_ratio": ratio_model is not None}
    return ExperimentReport("round", rows, meta)


# --------------------------------------------------------------- end to end


def iou(a, b) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = (a | b).sum()
    return float((a & b).sum() / union) if union else 1.0


def simulate_pour(mask, trajectory, ratio: float, level: float, speed_model: ControlModel,
                  params: sim.SurrogateParams | None = None, plate_origin=(0.0, 0.0)):
    """Plan timing for ``trajectory``, pour it over a grid aligned with ``mask``.

    Returns ``(grid, plan, iou)``.
    """
    from .control.execution import execute_plan, plan_execution

    params = params or sim.SurrogateParams()
    plan = plan_execution(trajectory, ratio, speed_model, level, params)
    grid = sim.DepositionGrid.for_mask(mask.pixels.shape, mask.scale, plate_origin)
    grid = execute_plan(plan, grid, sim.BatterTruth(ratio, level), params)
    return grid, plan, iou(deposit_mask(grid), mask.pixels)
