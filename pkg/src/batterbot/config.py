"""Run configuration: flat key = value sections, unit-suffixed quantities."""
from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field, fields

from .perception import WEIGHTING_MODES
from .sim import SurrogateParams

__all__ = ["ConfigError", "RunConfig", "parse_length", "parse_duration", "format_length"]

LENGTH_UNITS = {"m": 1.0, "cm": 0.01, "mm": 0.001}
TIME_UNITS = {"s": 1.0, "ms": 0.001, "min": 60.0}
_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Z]*)\s*$")


class ConfigError(ValueError):
    pass


def _parse(text, units, default_unit, what):
    m = _QTY.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse {what} {text!r}")
    value, unit = float(m.group(1)), m.group(2) or default_unit
    if unit not in units:
        raise ConfigError(f"unknown unit {unit!r} in {text!r}; use one of {', '.join(units)}")
    return value * units[unit]


def parse_length(text, default_unit: str = "m") -> float:
    """'10mm' -> 0.01. Bare numbers are in ``default_unit``."""
    return _parse(text, LENGTH_UNITS, default_unit, "length")


def parse_duration(text, default_unit: str = "s") -> float:
    return _parse(text, TIME_UNITS, default_unit, "duration")


def format_length(value: float, unit: str = "m") -> str:
    return f"{value / LENGTH_UNITS[unit]:.6g} {unit}"


_SURROGATE_KEYS = tuple(f.name for f in fields(SurrogateParams))


@dataclass
class RunConfig:
    """Everything a CLI run can be configured with; defaults make every command work."""

    surrogate: dict = field(default_factory=dict)
    seed: int = 0
    units: str = "m"
    weighting_mode: str = "inverse_mse"
    threshold_frac: float = 0.05
    jump_threshold: float | None = None
    dataset_dir: str = "data"
    model_dir: str = "models"
    output_dir: str = "out"

    _RUN_KEYS = ("seed", "units", "weighting_mode", "threshold_frac", "jump_threshold")
    _PATH_KEYS = ("dataset_dir", "model_dir", "output_dir")

    def validate(self) -> "RunConfig":
        unknown = set(self.surrogate) - set(_SURROGATE_KEYS)
        if unknown:
            raise ConfigError(f"unknown surrogate keys: {', '.join(sorted(unknown))}")
        try:
            self.params()
        except ValueError as exc:
            raise ConfigError(f"invalid surrogate parameters: {exc}") from None
        if self.units not in LENGTH_UNITS:
            raise ConfigError(f"units must be one of {', '.join(LENGTH_UNITS)}")
        if self.weighting_mode not in WEIGHTING_MODES:
            raise ConfigError(f"weighting_mode must be one of {', '.join(WEIGHTING_MODES)}")
        if not 0 < self.threshold_frac < 1:
            raise ConfigError("threshold_frac must lie in (0, 1)")
        if self.jump_threshold is not None and not self.jump_threshold > 0:
            raise ConfigError("jump_threshold must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        return self

    def params(self) -> SurrogateParams:
        return SurrogateParams(**self.surrogate)

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config syntax: {exc}") from None
        cfg = cls()
        for section in cp.sections():
            items = dict(cp.items(section))
            if section == "surrogate":
                for k, v in items.items():
                    if k not in _SURROGATE_KEYS:
                        raise ConfigError(f"unknown key [surrogate] {k}")
                    try:
                        cfg.surrogate[k] = float(v)
                    except ValueError:
                        raise ConfigError(f"[surrogate] {k} must be a number, got {v!r}") from None
            elif section == "run":
                for k, v in items.items():
                    if k not in cls._RUN_KEYS:
                        raise ConfigError(f"unknown key [run] {k}")
                    try:
                        if k == "seed":
                            cfg.seed = int(v)
                        elif k == "threshold_frac":
                            cfg.threshold_frac = float(v)
                        elif k == "jump_threshold":
                            cfg.jump_threshold = None if v.strip().lower() == "none" else float(v)
                        else:
                            setattr(cfg, k, v.strip())
                    except ValueError:
                        raise ConfigError(f"[run] {k}: bad value {v!r}") from None
            elif section == "paths":
                for k, v in items.items():
                    if k not in cls._PATH_KEYS:
                        raise ConfigError(f"unknown key [paths] {k}")
                    setattr(cfg, k, v.strip())
            else:
                raise ConfigError(f"unknown section [{section}]")
        if cp.defaults():
            raise ConfigError("keys outside a section are not allowed")
        return cfg.validate()

    def serialize(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["surrogate"] = {k: repr(float(v)) for k, v in sorted(self.surrogate.items())}
        cp["run"] = {
            "seed": str(self.seed),
            "units": self.units,
            "weighting_mode": self.weighting_mode,
            "threshold_frac": repr(self.threshold_frac),
            "jump_threshold": "none" if self.jump_threshold is None else repr(self.jump_threshold),
        }
        cp["paths"] = {k: getattr(self, k) for k in self._PATH_KEYS}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()
