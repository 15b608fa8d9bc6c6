"""Corner table and device-mismatch Monte Carlo for the integrated variants.

Pass a run count as the first argument (default 40; the full study uses 250).
"""
import sys

from rramcam.analysis import experiments as ex
from rramcam.camcell import INTEGRATED, make_variant
from rramcam.cli import corner_summary

variants = [make_variant(k) for k in INTEGRATED]
rows = ex.corner_table(variants)
print(corner_summary(rows, [c.name for c in ex.STANDARD_CORNERS], [k.value for k in INTEGRATED]))

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 40
for v in variants:
    r = ex.monte_carlo(v, run_count=runs, seed=1)
    print(f"{v.kind.value:18s} mu {r.mu * 1e3:6.1f} mV  sigma {r.sigma * 1e3:5.2f} mV  "
          f"sigma/mu {r.cv:.3f}")
