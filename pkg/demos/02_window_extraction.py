"""The differential window-width method on a synthetic trace and on the PCB cell.

The trace is smoothed with a 50-sample moving average, differentiated, and the
window edges are read off at the derivative maximum and minimum.
"""
import numpy as np

from rramcam.analysis.experiments import cell_trace
from rramcam.analysis.measure import fwhm_metrics, window_metrics
from rramcam.camcell import make_variant
from rramcam.trace import Trace

x = np.linspace(0.0, 1.8, 1801)
trap = np.minimum(np.clip((x - 0.35) / 0.1, 0, 1), np.clip((1.55 - x) / 0.1, 0, 1))
m = window_metrics(Trace(x, 1e-6 * trap))
print(f"trapezoid (edges at 0.4 / 1.5 V): width {m.width:.4f} V")

variant = make_variant("PcbResistor")
tr = cell_trace(variant)  # widest configuration, 5898 samples
m, f = window_metrics(tr), fwhm_metrics(tr)
print(f"PCB cell: window [{m.lower_threshold:.3f}, {m.upper_threshold:.3f}] V, "
      f"width {m.width:.3f} V, peak {m.peak_current * 1e6:.2f} uA")
print(f"          FWHM width {f.width:.3f} V (the differential value is the more pessimistic one)")
