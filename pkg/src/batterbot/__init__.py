"""Simulated pancake-batter robot: stirring perception, pour control and
shape-to-trajectory planning, checked against a surrogate batter model."""

__version__ = "0.1.0"
