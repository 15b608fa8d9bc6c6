"""Maximum window width grows linearly with the supply voltage."""
import numpy as np

from rramcam.analysis.experiments import supply_linearity
from rramcam.camcell import make_variant

fit = supply_linearity(make_variant("PcbResistor"), np.linspace(1.2, 2.4, 7))
for s, w in zip(fit.supplies, fit.widths):
    print(f"VDD {s:.1f} V -> width {w:.3f} V")
print(f"slope {fit.slope:.3f} V/V, r2 {fit.r2:.5f}, zero width at {fit.zero_width_supply:.2f} V")
