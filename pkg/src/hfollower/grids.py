"""Uniform time and space grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_0 = 0 < ... < t_M = T with M*h = T exactly."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if self.horizon <= 0.0 or not np.isfinite(self.horizon):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.n_steps < 1:
            raise ValueError(f"need at least one step, got {self.n_steps}")

    @property
    def step(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.step

    @staticmethod
    def from_step(horizon: float, step: float) -> "TimeGrid":
        """Round the step so the horizon is an exact multiple of it."""
        n = max(1, int(round(horizon / step)))
        return TimeGrid(horizon=float(horizon), n_steps=n)


@dataclass(frozen=True)
class Grid1D:
    """Uniform spatial grid on [lo, hi] with n_points nodes."""

    lo: float
    hi: float
    n_points: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.n_points < 3:
            raise ValueError(f"need at least 3 points, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    def refined(self, factor: int = 2) -> "Grid1D":
        """Same interval with the spacing divided by `factor`."""
        return Grid1D(self.lo, self.hi, (self.n_points - 1) * factor + 1)
