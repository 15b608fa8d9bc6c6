"""Each dynamic element moves one window edge.

M1 sets the lower threshold, M2 the upper one. Both sweeps use 16
geometrically spaced states over 100 kOhm - 10 MOhm.
"""
from rramcam.analysis.experiments import threshold_sweep
from rramcam.camcell import geometric_states, make_variant

variant = make_variant("PcbResistor")
states = geometric_states(variant.dynamic_range, 16)

for element in ("M1", "M2"):
    print(f"\n{element} swept, other element at 10 MOhm")
    print("   state      lower    upper    width")
    for p in threshold_sweep(variant, element, states[::3], fixed_other=10e6):
        m = p.metrics
        print(f"{p.state / 1e3:8.0f}k  {m.lower_threshold:7.3f}  {m.upper_threshold:7.3f}  {m.width:7.3f}")
