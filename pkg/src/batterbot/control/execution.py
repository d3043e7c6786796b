"""Timing a trajectory into a pour plan and running it on the virtual griddle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..sim import BatterTruth, DepositionGrid, SurrogateParams, deposit_stroke
from .policy import ControlModel, UntrainedModelError, predict_speed
from .vision import TILT_RATE, initial_angle

__all__ = ["TRAVEL_SPEED", "Segment", "PourPlan", "plan_execution", "execute_plan"]

TRAVEL_SPEED = 0.05  # m/s, pen up


@dataclass(frozen=True)
class Segment:
    start: tuple
    end: tuple
    speed: float
    pen_down: bool

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)

    @property
    def duration(self) -> float:
        return self.length / self.speed


@dataclass
class PourPlan:
    """Timed waypoints plus the tilt schedule that precedes them."""

    segments: list
    strokes: list                       # (path array, speed) per pen-down stroke
    initial_angle: float
    tilt_rate: float = TILT_RATE
    stroke_width: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def pen_states(self) -> list:
        out = []
        for s in self.segments:
            if not out or out[-1] != s.pen_down:
                out.append(s.pen_down)
        return out

    def to_dict(self) -> dict:
        return {
            "initial_angle_rad": self.initial_angle,
            "tilt_rate_rad_s": self.tilt_rate,
            "stroke_width_m": self.stroke_width,
            "duration_s": self.duration,
            "segments": [
                {"start": list(s.start), "end": list(s.end), "speed_mps": s.speed,
                 "pen": "down" if s.pen_down else "up"}
                for s in self.segments
            ],
        }


def plan_execution(trajectory, ratio: float, speed_model: ControlModel | None, level: float,
                   params: SurrogateParams | None = None, margin: float = 0.05) -> PourPlan:
    """Assign the predicted arm speed to every pen-down segment.

    Pen-up moves between strokes run at ``TRAVEL_SPEED`` with the flow cut.
    """
    params = params or SurrogateParams()
    if speed_model is None:
        raise UntrainedModelError("no speed model")
    if len(trajectory.strokes) == 0:
        raise ValueError("trajectory has no strokes")
    v = predict_speed(speed_model, ratio, trajectory.stroke_width)
    segments, strokes = [], []
    here = None
    for stroke in trajectory.strokes:
        path = stroke.path()
        p0 = tuple(float(c) for c in path[0])
        if here is not None and here != p0:
            segments.append(Segment(here, p0, TRAVEL_SPEED, False))
        for a, b in zip(path[:-1], path[1:]):
            segments.append(Segment(tuple(map(float, a)), tuple(map(float, b)), v, True))
        here = tuple(float(c) for c in path[-1])
        strokes.append((np.array(path), v))
    return PourPlan(segments, strokes, initial_angle(level, params, margin),
                    stroke_width=trajectory.stroke_width, meta={"ratio": ratio, "level": level})


def execute_plan(plan: PourPlan, grid: DepositionGrid, truth: BatterTruth,
                 params: SurrogateParams | None = None) -> DepositionGrid:
    """Deposit every pen-down stroke of ``plan`` at its planned speed."""
    params = params or SurrogateParams()
    for path, v in plan.strokes:
        grid = deposit_stroke(grid, path, v, truth, params)
    return grid
