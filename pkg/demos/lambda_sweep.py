"""Train a small agent, sweep the trade-off parameter and fit the trend models.

A short run (default 20k steps, a couple of minutes) is enough to exercise
the whole pipeline; meaningful trends need far longer training.

    python demos/lambda_sweep.py [steps] [out_dir]
"""
import sys
from pathlib import Path

import numpy as np

from asvlab import config as C
from asvlab import eval as ev
from asvlab.env import ASVEnv
from asvlab.rl import Agent, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
out = Path(sys.argv[2] if len(sys.argv) > 2 else "lambda_sweep_out")
out.mkdir(parents=True, exist_ok=True)

cfg = C.load_file(Path(__file__).resolve().parents[1] / "configs" / "desk.json")
cfg["ppo"]["total_steps"] = steps
env_config = C.build_env_config(cfg)
ck, rows = train(lambda s: ASVEnv(env_config, seed=s), C.ppo_config(cfg), seed=cfg["seed"], out_dir=out)
print(f"trained {ck.steps} steps over {ck.iteration} iterations")

agent = Agent.from_checkpoint(ck)
reports = [ev.run_eval(agent, lam, 10, seed=1, env_config=env_config) for lam in np.logspace(-4, 0, 5)]
fits = [ev.lm_fit(m, [r.lam for r in reports], [getattr(r, a) for r in reports])
        for m, a in (("logistic-success", "success_rate"), ("power-cte", "avg_cross_track_error"),
                     ("loglinear-length", "avg_episode_length"))]
ev.emit_plots(out, reports, fits=fits)
print(ev.report_csv(reports))
print(ev.fits_csv(fits))
