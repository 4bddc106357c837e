"""Run a hand-written line-of-sight controller through the built-in scenarios.

The controller ignores obstacles, so it reaches the goal where the path is
clear and collides where an obstacle sits on the path.  Writes a trajectory
CSV per scenario into the output directory.

    python demos/scripted_follower.py [out_dir]
"""
import math
import sys
from pathlib import Path

import numpy as np

from asvlab import eval as ev
from asvlab.env import ASVEnv


class LineOfSight:
    def mean_action(self, obs):
        # obs[4]: look-ahead course error, obs[5]: cross-track error, obs[2]: yaw rate
        err = obs[4] - math.atan(obs[5] / 20.0)
        return np.array([1400.0, float(np.clip(3000.0 * err - 20000.0 * obs[2], -2700, 2700))])


out = Path(sys.argv[1] if len(sys.argv) > 1 else "scripted_follower_out")
out.mkdir(parents=True, exist_ok=True)
env = ASVEnv(seed=0, record=True)
traces, scenes = {}, {}
for name, sc in ev.builtin_scenarios().items():
    reason, steps, cte, ret = ev.run_episode(LineOfSight(), env, sc, 1.0)
    print(f"scenario {name}: {reason} after {steps * env.config.h:.0f} s, "
          f"mean |cte| {cte / steps:.2f} m, return {ret:.0f}")
    traces[name], scenes[name] = list(env.trace), sc
for p in ev.emit_plots(out, reports=None, traces=traces, scenarios=scenes):
    print("wrote", p)
