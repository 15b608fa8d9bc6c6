"""Trace denoising and window extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..trace import Trace

DEFAULT_WINDOW = 50
# derivative values this close (relative) to the extreme count as ties
TIE_RTOL = 1e-9


class WindowTooLarge(ValueError):
    pass


class DegenerateTrace(ValueError):
    pass


@dataclass(frozen=True)
class WindowMetrics:
    lower_threshold: float
    upper_threshold: float
    width: float
    peak_current: float

    @classmethod
    def from_edges(cls, a: float, b: float, peak: float) -> "WindowMetrics":
        lo, hi = (a, b) if a <= b else (b, a)
        return cls(lo, hi, hi - lo, peak)


def moving_average(trace: Trace, window: int = DEFAULT_WINDOW) -> Trace:
    """Centered boxcar average with shrinking windows at the ends.

    Sample ``i`` averages ``y[i - window//2 : i + (window - 1)//2 + 1]``
    clipped to the trace. For even ``window`` the box sits half a sample
    ahead of ``x[i]``.
    """
    return trace.with_y(boxcar(trace.y, window))


def boxcar(y, window: int) -> np.ndarray:
    y = np.asarray(y, float)
    n = len(y)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > n:
        raise WindowTooLarge(f"window {window} exceeds trace length {n}")
    if window == 1:
        return y.copy()
    csum = np.concatenate([[0.0], np.cumsum(y)])
    idx = np.arange(n)
    lo = np.clip(idx - window // 2, 0, n)
    hi = np.clip(idx + (window - 1) // 2 + 1, 0, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def _first_extreme(d, sign):
    target = np.max(sign * d)
    tol = TIE_RTOL * max(np.max(np.abs(d)), 1e-300)
    return int(np.flatnonzero(sign * d >= target - tol)[0])


def derivative(trace: Trace) -> np.ndarray:
    return np.gradient(trace.y, trace.x)


def window_metrics(trace: Trace, window: int = DEFAULT_WINDOW) -> WindowMetrics:
    """Differential window: x at the derivative maximum and minimum.

    The trace is denoised first. Near-equal extremes resolve to the smallest x.
    """
    smooth = moving_average(trace, window)
    d = derivative(smooth)
    if not np.all(np.isfinite(d)) or np.ptp(d) == 0:
        raise DegenerateTrace("derivative has no distinct extrema")
    i_max = _first_extreme(d, +1)
    i_min = _first_extreme(d, -1)
    if i_max == i_min:
        raise DegenerateTrace("derivative maximum and minimum coincide")
    return WindowMetrics.from_edges(trace.x[i_max], trace.x[i_min], float(np.max(smooth.y)))


def fwhm_metrics(trace: Trace, window: int = DEFAULT_WINDOW) -> WindowMetrics:
    """Outermost half-maximum crossings of the denoised trace, interpolated."""
    y = boxcar(trace.y, window)
    x = trace.x
    peak = float(np.max(y))
    if not peak > 0:
        raise DegenerateTrace("peak current must be positive")
    half = 0.5 * peak
    above = np.flatnonzero(y >= half)
    i, j = above[0], above[-1]
    if i == 0 or j == len(y) - 1:
        raise DegenerateTrace("half-maximum crossing not bracketed by the trace")

    def crossing(a, b):
        return x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a])

    return WindowMetrics.from_edges(crossing(i - 1, i), crossing(j, j + 1), peak)


def contiguous_regions(mask) -> list:
    """``[(start, stop), ...]`` index runs where ``mask`` is true (stop exclusive)."""
    mask = np.asarray(mask, bool)
    edges = np.diff(np.concatenate([[0], mask.view(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))
