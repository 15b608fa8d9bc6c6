"""Sampled sweep data shared by the solver and the analysis routines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trace:
    """Ordered (input voltage, output current) samples."""

    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if len(self.x) < 2:
            raise ValueError("a trace needs at least two samples")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("trace x must be strictly increasing")

    def __len__(self):
        return len(self.x)

    @property
    def pitch(self) -> float:
        return float((self.x[-1] - self.x[0]) / (len(self.x) - 1))

    def with_y(self, y) -> "Trace":
        return Trace(self.x.copy(), y, dict(self.meta))
