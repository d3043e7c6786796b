import json
import math

import numpy as np
import pytest

from batterbot import sim
from batterbot.control import UntrainedModelError
from batterbot.eval import (
    LINE_RATIOS,
    ExperimentReport,
    Row,
    baseline_round_volume,
    cell_seed,
    iou,
    run_line_experiment,
    run_perception_experiment,
    run_round_experiment,
    simple_reference_speed,
    simple_speed,
    training_level,
)
from batterbot.measure import MeasurementError, measure_disk, measure_stroke_width
from batterbot.sim import BatterTruth, DepositionGrid


def _line(width, params, ratio=1.3, angle=0.4):
    c = np.array([0.1, 0.1])
    d = 0.06 * np.array([math.cos(angle), math.sin(angle)])
    path = np.array([c - d, c + d])
    v = params.flow_rate / (width * sim.spread_thickness(ratio, params))
    grid = sim.deposit_stroke(DepositionGrid.empty(0.2, 0.2, 0.001), path, v,
                              BatterTruth(ratio, 0.03), params)
    return grid, path


class TestMeasure:
    @pytest.mark.parametrize("angle", [0.0, 0.4, math.pi / 2, 2.3])
    def test_known_swath(self, params, angle):
        grid, path = _line(0.01, params, angle=angle)
        mean, var = measure_stroke_width(grid, path)
        assert mean == pytest.approx(0.01, abs=0.0005)
        assert var >= 0

    def test_empty_grid(self):
        with pytest.raises(MeasurementError):
            measure_stroke_width(DepositionGrid.empty(0.1, 0.1), [[0.01, 0.01], [0.05, 0.05]])
        with pytest.raises(MeasurementError):
            measure_disk(DepositionGrid.empty(0.1, 0.1))

    def test_stroke_outside(self, params):
        grid, _ = _line(0.01, params)
        with pytest.raises(MeasurementError):
            measure_stroke_width(grid, [[0.3, 0.3], [0.4, 0.4]])

    def test_disk_area(self, params):
        truth = BatterTruth(1.3, 0.03)
        vol = math.pi * 0.05**2 * sim.spread_thickness(1.3, params)
        grid = sim.deposit_pool(DepositionGrid.empty(0.2, 0.2, 0.001), (0.1, 0.1), vol, truth, params)
        area, diam = measure_disk(grid)
        assert area == pytest.approx(math.pi * 0.05**2, rel=0.01)
        assert diam == pytest.approx(0.1, rel=0.01)

    def test_two_blobs_sum(self, params):
        truth = BatterTruth(1.3, 0.03)
        g = DepositionGrid.empty(0.3, 0.15, 0.001)
        a = measure_disk(sim.deposit_pool(g, (0.07, 0.07), 1e-5, truth, params))[0]
        b = measure_disk(sim.deposit_pool(g, (0.22, 0.07), 2e-5, truth, params))[0]
        both = sim.deposit_pool(sim.deposit_pool(g, (0.07, 0.07), 1e-5, truth, params),
                                (0.22, 0.07), 2e-5, truth, params)
        assert measure_disk(both)[0] == pytest.approx(a + b)


class TestReport:
    def _report(self):
        rows = [Row("a", 1.3, 0.01, 0.011), Row("a", 1.3, 0.01, 0.009),
                Row("a", 1.4, 0.02, 0.021), Row("b", 1.3, 0.01, 0.02, "g")]
        return ExperimentReport("x", rows)

    def test_aggregates_recomputable(self):
        agg = self._report().aggregates()
        assert set(agg) == {"a", "b/g"}
        assert agg["a"]["n"] == 3
        assert agg["a"]["mean_error"] == pytest.approx(0.001)
        assert agg["a"]["mean_pct_error"] == pytest.approx((0.1 + 0.1 + 0.05) / 3)
        assert agg["a"]["variance"] == pytest.approx((0.001 + 0.0) / 2)
        assert agg["b/g"]["mean_pct_error"] == pytest.approx(1.0)

    def test_json_round_trip(self):
        rep = self._report()
        back = ExperimentReport.from_dict(json.loads(rep.to_json()))
        assert back.rows == rep.rows
        assert back.aggregates() == rep.aggregates()

    def test_csv_and_write(self, tmp_path):
        rep = self._report()
        csv_path, json_path = rep.write(tmp_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("method,group,ratio")
        assert len(lines) == 5
        assert json.loads(json_path.read_text())["experiment"] == "x"

    def test_cell_seed(self):
        assert cell_seed(1, 2, 3) == cell_seed(1, 2, 3)
        assert cell_seed(1, 2, 3) != cell_seed(1, 3, 2)

    def test_iou(self):
        a = np.zeros((4, 4), bool)
        a[:2] = True
        b = np.zeros((4, 4), bool)
        b[1:3] = True
        assert iou(a, b) == pytest.approx(1 / 3)
        assert iou(a, a) == 1.0
        assert iou(np.zeros(3), np.zeros(3)) == 1.0


class TestBaselines:
    def test_simple_speed_laws(self):
        assert simple_speed(0.01, 0.02) == 0.02
        assert simple_speed(0.02, 0.02) == 0.01
        assert simple_speed(0.02, 0.02, "linear") == 0.04
        with pytest.raises(ValueError):
            simple_speed(0.01, 0.02, "cubic")

    def test_simple_near_reference(self, params):
        rep = run_line_experiment(None, ratios=(1.35,), widths=(0.01,), methods=("simple",),
                                  params=params)
        assert rep.aggregate("simple")["mean_pct_error"] < 0.03

    def test_reference_speed_is_mean(self, params):
        v = simple_reference_speed(params)
        each = [params.flow_rate / (0.01 * sim.spread_thickness(r, params)) for r in LINE_RATIOS]
        assert min(each) < v < max(each)

    def test_round_baseline_overshoots(self, params):
        truth = BatterTruth(1.35, 0.03)
        target = math.pi * 0.05**2 * sim.spread_thickness(1.35, params)
        assert baseline_round_volume(0.1, truth, params) > target

    def test_training_level(self):
        assert 0.005 < training_level(1.0) < 0.055
        assert training_level(1.5) < training_level(1.0)


class TestExperiments:
    def test_line_needs_model(self):
        with pytest.raises(UntrainedModelError):
            run_line_experiment(None, ratios=(1.3,), widths=(0.02,))

    def test_round_needs_model(self):
        with pytest.raises(UntrainedModelError):
            run_round_experiment(None, ratios=(1.3,), diameters=(0.1,))

    def test_line_ordering(self, speed_model, params):
        rep = run_line_experiment(speed_model, params=params, seed=2)
        assert rep.aggregate("ours")["mean_pct_error"] < rep.aggregate("simple")["mean_pct_error"]
        assert rep.aggregate("ours")["mean_pct_error"] < 0.05

    def test_round_ordering(self, time_model, params):
        rep = run_round_experiment(time_model, params=params, seed=2)
        assert rep.aggregate("ours")["mean_pct_error"] < rep.aggregate("baseline")["mean_pct_error"]

    def test_round_perfect_time(self, params):
        # feeding the exact volume gives the measured area within 2%
        truth = BatterTruth(1.3, 0.03)
        d = 0.05
        vol = math.pi * (d / 2) ** 2 * sim.spread_thickness(1.3, params)
        grid = sim.deposit_pool(DepositionGrid.empty(0.1, 0.1, 0.001), (0.05, 0.05), vol, truth, params)
        assert measure_disk(grid)[0] == pytest.approx(math.pi * (d / 2) ** 2, rel=0.02)

    def test_deterministic(self, speed_model, params):
        a = run_line_experiment(speed_model, ratios=(1.3,), widths=(0.02,), seed=5, params=params)
        b = run_line_experiment(speed_model, ratios=(1.3,), widths=(0.02,), seed=5, params=params)
        assert a.to_json() == b.to_json()

    def test_perception_rows(self, ratio_model, params):
        rep = run_perception_experiment(ratio_model, n_small=2, n_large=1, params=params)
        assert len(rep.rows) == 9
        assert set(rep.aggregates()) == {f"{m}/{g}" for m in ("level", "ratio", "stop_trial")
                                         for g in ("small", "large")}
        assert rep.aggregate("level", "small")["mean_pct_error"] < 0.02
