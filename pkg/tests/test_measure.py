import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rramcam.analysis.measure import (
    DegenerateTrace, WindowTooLarge, boxcar, contiguous_regions, derivative, fwhm_metrics,
    moving_average, window_metrics,
)
from rramcam.trace import Trace


def trapezoid(rise=0.4, fall=1.5, edge=0.1, n=1801, top=1e-6, span=1.8):
    x = np.linspace(0.0, span, n)
    up = np.clip((x - (rise - edge / 2)) / edge, 0, 1)
    down = np.clip(((fall + edge / 2) - x) / edge, 0, 1)
    return Trace(x, top * np.minimum(up, down))


def gaussian(sigma=0.1, center=0.9, n=18001):
    x = np.linspace(0.0, 1.8, n)
    return Trace(x, 1e-6 * np.exp(-0.5 * ((x - center) / sigma) ** 2))


def test_trapezoid_fixture_width():
    tr = trapezoid()
    m = window_metrics(tr)
    assert m.width == pytest.approx(1.1, abs=tr.pitch)
    assert m.lower_threshold < m.upper_threshold
    assert m.peak_current == pytest.approx(1e-6)


def test_inverted_trapezoid_still_ordered():
    tr = trapezoid()
    dip = tr.with_y(1e-6 - tr.y)
    m = window_metrics(dip)
    assert m.lower_threshold <= m.upper_threshold
    assert m.width == pytest.approx(1.1, abs=tr.pitch)


def test_gaussian_differential_width():
    tr = gaussian()
    m = window_metrics(tr)
    assert m.width == pytest.approx(0.2, abs=tr.pitch)
    assert (m.lower_threshold + m.upper_threshold) / 2 == pytest.approx(0.9, abs=tr.pitch)


def test_gaussian_fwhm():
    tr = gaussian()
    assert fwhm_metrics(tr).width == pytest.approx(2 * np.sqrt(2 * np.log(2)) * 0.1, abs=tr.pitch)
    assert fwhm_metrics(tr).width == pytest.approx(0.2355, abs=5e-4)


def test_rectangle_fwhm_equals_differential():
    x = np.linspace(0.0, 1.8, 1801)
    tr = Trace(x, np.where((x >= 0.4) & (x < 1.4), 1e-6, 0.0))
    f, d = fwhm_metrics(tr), window_metrics(tr)
    assert f.width == pytest.approx(1.0, abs=tr.pitch)
    assert f.width == pytest.approx(d.width, abs=tr.pitch)


def test_constant_unchanged():
    tr = Trace(np.linspace(0, 1, 200), np.full(200, 5e-6))
    for w in (1, 2, 7, 50, 200):
        np.testing.assert_allclose(moving_average(tr, w).y, tr.y, rtol=1e-12)


@pytest.mark.parametrize("w", [3, 25, 51])
def test_ramp_interior_unchanged_odd_window(w):
    x = np.linspace(0, 1, 500)
    y = 3.0 * x - 1.0
    out = boxcar(y, w)
    h = w // 2
    np.testing.assert_allclose(out[h:-h], y[h:-h], atol=1e-12)


def test_ramp_even_window_half_sample_shift():
    x = np.linspace(0, 1, 501)
    y = 2.0 * x
    out = boxcar(y, 50)
    pitch = x[1] - x[0]
    np.testing.assert_allclose(out[25:-25], y[25:-25] - 2.0 * pitch / 2, atol=1e-12)


def test_impulse_plateau():
    y = np.zeros(1001)
    y[500] = 1.0
    out = boxcar(y, 50)
    nz = np.flatnonzero(out > 1e-15)
    assert len(nz) == 50
    np.testing.assert_allclose(out[nz], 1 / 50, rtol=1e-12)


def test_window_too_large():
    tr = trapezoid(n=40)
    with pytest.raises(WindowTooLarge):
        moving_average(tr, 50)


def test_flat_trace_is_degenerate():
    tr = Trace(np.linspace(0, 1.8, 300), np.zeros(300))
    with pytest.raises(DegenerateTrace):
        window_metrics(tr)
    with pytest.raises(DegenerateTrace):
        fwhm_metrics(tr)


def test_derivative_edges_one_sided():
    x = np.linspace(0, 1, 11)
    d = derivative(Trace(x, x ** 2))
    assert d[0] == pytest.approx(0.1)  # forward difference
    assert d[5] == pytest.approx(1.0)  # central difference is exact for a parabola


def test_contiguous_regions():
    assert contiguous_regions([0, 1, 1, 0, 1]) == [(1, 3), (4, 5)]
    assert contiguous_regions([0, 0]) == []


def test_trace_validation():
    with pytest.raises(ValueError):
        Trace([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        Trace([0.0], [1.0])


@settings(max_examples=60, deadline=None)
@given(rise=st.floats(0.2, 0.8), width=st.floats(0.3, 0.8), scale=st.floats(1e-9, 1e-3),
       shift=st.floats(-1.0, 1.0))
def test_metrics_invariances(rise, width, scale, shift):
    tr = trapezoid(rise=rise, fall=rise + width, edge=0.05, top=1.0)
    base = window_metrics(tr)
    scaled = window_metrics(tr.with_y(scale * tr.y))
    moved = window_metrics(Trace(tr.x + shift, tr.y))
    assert scaled.width == pytest.approx(base.width, abs=1e-12)
    assert moved.lower_threshold == pytest.approx(base.lower_threshold + shift, abs=1e-9)
    assert base.width == pytest.approx(width, abs=tr.pitch)
    # symmetric single peak: differential and FWHM agree within two pitches
    assert fwhm_metrics(tr).width == pytest.approx(base.width, abs=2 * tr.pitch)
