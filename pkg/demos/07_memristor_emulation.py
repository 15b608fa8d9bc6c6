"""Programming a memristor-backed M2 and sweeping the cell.

With an ideal device the thresholds match the resistor model. Turning on
two-level telegraph switching makes the trace hop between two current levels.
"""
import numpy as np

from rramcam.analysis import experiments as ex
from rramcam.camcell import make_variant
from rramcam.devices import MemristorState, Telegraph

cell = make_variant("PcbMemristor")
ideal = ex.memristor_emulation_sweep(cell, "M2", [8e6, 2e6, 500e3], seed=0)
for p in ideal:
    print(f"target {p.target / 1e3:6.0f}k read {p.read_state / 1e3:7.1f}k -> "
          f"upper threshold {p.metrics.upper_threshold:.3f} V")

noisy = MemristorState(7e6, telegraph=Telegraph(6e6, 8e6, 0.2))
p = ex.memristor_emulation_sweep(cell, "M2", [7e6], seed=3, device=noisy)[0]
levels, counts = np.unique(p.resistance, return_counts=True)
print("telegraph levels visited:", dict(zip((levels / 1e6).round(1).tolist(), counts.tolist())))
