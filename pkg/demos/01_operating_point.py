"""DC operating points: a divider, an inverter, and the homotopy ladder.

Run: python demos/01_operating_point.py
"""
import numpy as np

from rramcam import netlist as nl
from rramcam.devices import GENERIC180
from rramcam.solver import dc_solve, dc_sweep

# A 10 MOhm / 100 kOhm divider: the two ends of the PCB dynamic range.
c = nl.Circuit()
top, mid = c.node("top"), c.node("mid")
c = nl.add_device(c, nl.vsource("VDD", top, nl.GROUND, 1.8))
c = nl.add_device(c, nl.resistor("RT", top, mid, 10e6))
c = nl.add_device(c, nl.resistor("RB", mid, nl.GROUND, 100e3))
sol = dc_solve(c)
print(f"divider midpoint: {sol.voltage('mid') * 1e3:.3f} mV (closed form {1.8 / 101 * 1e3:.3f} mV)")

# A CMOS inverter. Non-linear, so Newton has to iterate.
c = nl.Circuit()
vdd, vin, out = c.node("vdd"), c.node("in"), c.node("out")
for d in (nl.vsource("VDD", vdd, 0, 1.8), nl.vsource("VIN", vin, 0, 0.0),
          nl.mosfet("MP", out, vin, vdd, vdd, GENERIC180["pmos"]),
          nl.mosfet("MN", out, vin, 0, 0, GENERIC180["nmos"])):
    c = nl.add_device(c, d)
sol = dc_solve(c)
print(f"inverter at Vin=0: Vout = {sol.voltage('out'):.6f} V "
      f"({sol.iterations} iterations, stage '{sol.stage}')")

# Transfer curve via a warm-started sweep; the probe-free circuit reports the
# supply branch current, so pass the source label as probe.
tr = dc_sweep(c, "VIN", 0.0, 1.8, 181, probe="VDD")
i_peak = -tr.y.min()
print(f"peak shoot-through current {i_peak * 1e6:.2f} uA at Vin = {tr.x[np.argmin(tr.y)]:.2f} V")
