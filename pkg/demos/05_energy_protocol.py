"""Energy per enabled test on the minimum-size integrated cell.

Input leaves its park rail and settles for 2.35 ns, the output is enabled
for 450 ps, and the input returns to park 200 ps later. Energy integrates
v*i at the input, enable and supply sources.
"""
from rramcam.analysis import experiments as ex
from rramcam.camcell import make_variant

v = make_variant("IntegratedMinimum")
win = ex.dc_window(v)
near, far = ex.miss_voltages(win, v.supply, ex.Park.GROUND)
print(f"window [{win.lower_threshold:.3f}, {win.upper_threshold:.3f}] V, parked at ground")
for v_test in (near, 0.9, far):
    r = ex.energy_test(v, v_test=v_test, window=win)
    parts = ", ".join(f"{k} {e * 1e15:.2f}" for k, e in r.breakdown.items())
    print(f"{v_test:.2f} V {r.classification.value:8s} {r.energy * 1e15:6.2f} fJ  ({parts} fJ)")

off = ex.energy_test(v, v_test=0.9, pulse=0.0, window=win)
print(f"never enabled: output stage draws {off.output_stage * 1e15:.2e} fJ")
