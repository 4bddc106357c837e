"""Compare min, max and feasibility pooling on one vessel pose in a random scenario.

    python demos/pooling_comparison.py [seed]
"""
import sys

import numpy as np

from asvlab import scenario as scen
from asvlab import sensing

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 3
sc = scen.generate(scen.GenParams(), seed)
cfg = sensing.SensorConfig()
centers, radii = sc.obstacle_arrays()

# stand on the path a third of the way along, facing along it
w = sc.path.length / 3
x, y = sc.path.point(w)
sweep = sensing.cast_rays((x, y, sc.path.tangent_angle(w)), centers, radii, cfg)
if sweep.inside_obstacle:
    sys.exit(f"seed {seed}: the chosen pose lies inside an obstacle, try another seed")

pooled = {m: sensing.pool_all(sweep, m, cfg) for m in sensing.POOLING_METHODS}
centre_angles = np.degrees(cfg.angles().reshape(cfg.d, cfg.n).mean(axis=1))
print(f"scenario seed {seed}, pose at arc length {w:.0f} m, {cfg.d} sectors of {cfg.n} rays")
print(f"{'sector':>6} {'angle':>7} " + " ".join(f"{m:>11}" for m in sensing.POOLING_METHODS))
for k in range(cfg.d):
    print(f"{k:>6} {centre_angles[k]:>6.1f}d " + " ".join(f"{pooled[m][k]:>11.2f}" for m in sensing.POOLING_METHODS))
