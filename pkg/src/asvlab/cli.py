"""Command-line entry point: ``asvlab <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags, missing
or unreadable input files).  Set ASVLAB_LOG=DEBUG|INFO|WARNING for logging.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config as C
from . import dynamics
from . import eval as ev
from . import scenario as scen
from . import sensing
from .env import ASVEnv
from .fileio import atomic_write_text
from .rl import checkpoint as ckpt
from .rl.train import CHECKPOINT_NAME, Agent, TrainingError, train

log = logging.getLogger("asvlab")
CONFIG_ECHO = "config.json"


class UsageError(Exception):
    """Bad input detected after argument parsing; exits with status 2."""


def _need_file(path, what):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _load_config(path):
    cfg = C.defaults()
    if path:
        try:
            cfg = C.load_file(_need_file(path, "config file"))
        except C.ConfigError as exc:
            raise UsageError(str(exc)) from exc
    return cfg


def _validated(cfg):
    try:
        return C.validate(cfg)
    except C.ConfigError as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _load_checkpoint(path):
    p = _need_file(path, "checkpoint")
    try:
        return ckpt.load(p)
    except ckpt.CheckpointError as exc:
        raise UsageError(f"{p}: {exc}") from exc


def _env_config_from(ck):
    """Environment the checkpoint was trained in, rebuilt from its metadata."""
    meta = ck.meta
    if "config" not in meta:
        raise UsageError("checkpoint carries no run configuration")
    vessel = dynamics.params_from_dict(meta["vessel"]) if "vessel" in meta else None
    return C.build_env_config(meta["config"], vessel=vessel)


# -- commands ---------------------------------------------------------------

def cmd_generate_scenario(args):
    cfg = _load_config(args.config)
    over = {k: v for k, v in (("N_o", args.N_o), ("L_p", args.L_p), ("mu_r", args.mu_r),
                              ("sigma_d", args.sigma_d)) if v is not None}
    if args.waypoints is not None:
        over["N_w_range"] = list(args.waypoints)
    try:
        params = scen.GenParams.from_dict(C.merge(cfg["scenario"], over, "scenario"))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid scenario parameters: {exc}") from exc
    sc = scen.generate(params, args.seed)
    scen.save(sc, args.out)
    log.info("wrote scenario seed %d to %s", args.seed, args.out)
    return 0


def cmd_train(args):
    out = Path(args.out)
    resume = None
    if args.resume:
        resume = _load_checkpoint(out / CHECKPOINT_NAME)
        cfg = resume.meta["config"]
        if args.config:
            cfg = C.merge(cfg, json.loads(_need_file(args.config, "config file").read_text()), args.config)
    else:
        cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.steps is not None:
        cfg["ppo"]["total_steps"] = args.steps
    cfg = _validated(cfg)
    if resume is not None and resume.meta["config"]["seed"] != cfg["seed"]:
        raise UsageError("cannot change the seed of a resumed run")

    env_config = C.build_env_config(cfg)
    ppo = C.ppo_config(cfg)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / CONFIG_ECHO, C.dumps(cfg))
    meta = {"config": cfg, "vessel": env_config.vessel.to_dict()}
    if resume is not None:
        resume.meta = meta

    def progress(row):
        log.info("iteration %d  steps %d  mean_reward %.2f  success %.2f", *row[:4])

    ck, _ = train(lambda s: ASVEnv(env_config, seed=s), ppo, seed=cfg["seed"], out_dir=out,
                  resume=resume, meta=meta, progress=progress)
    log.info("finished at %d steps; checkpoint in %s", ck.steps, out / CHECKPOINT_NAME)
    return 0


def cmd_evaluate(args):
    ck = _load_checkpoint(args.checkpoint)
    env_config = _env_config_from(ck)
    for lam in args.lam:
        if not 0.0 < lam <= 1.0:
            raise UsageError(f"lambda must lie in (0, 1], got {lam}")
    agent = Agent.from_checkpoint(ck)
    reports = []
    for lam in args.lam:
        r = ev.run_eval(agent, lam, args.episodes, seed=args.seed, env_config=env_config)
        log.info("lambda %g: success %.3f  cte %.2f m  length %.1f s", lam, r.success_rate,
                 r.avg_cross_track_error, r.avg_episode_length)
        reports.append(r)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ev.emit_plots(out, reports)
    echo = {"checkpoint": str(args.checkpoint), "lambdas": args.lam, "episodes": args.episodes,
            "seed": args.seed, "run_config": ck.meta["config"]}
    atomic_write_text(out / CONFIG_ECHO, C.dumps(echo))
    sys.stdout.write(ev.report_csv(reports))
    return 0


def _scenario_arg(value):
    builtin = ev.builtin_scenarios()
    if value in builtin:
        return builtin[value]
    p = _need_file(value, "scenario file")
    try:
        return scen.load(p)
    except scen.ScenarioFileError as exc:
        raise UsageError(str(exc)) from exc


def cmd_replay(args):
    ck = _load_checkpoint(args.checkpoint)
    sc = _scenario_arg(args.scenario)
    if not 0.0 < args.lam <= 1.0:
        raise UsageError(f"lambda must lie in (0, 1], got {args.lam}")
    env = ASVEnv(_env_config_from(ck), seed=0, record=True)
    reason, steps, _, total = ev.run_episode(Agent.from_checkpoint(ck), env, sc, args.lam)
    atomic_write_text(args.trace_out, ev.trace_csv(env.trace))
    if args.scene_out:
        atomic_write_text(args.scene_out, ev.scene_csv(sc))
    log.info("episode ended by %s after %d steps, return %.2f", reason, steps, total)
    return 0


def cmd_fit_curves(args):
    p = _need_file(args.report, "report")
    try:
        rows = ev.read_report_csv(p)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    models = sorted(ev.MODELS) if args.model == ["all"] else args.model
    fits = []
    for m in models:
        try:
            fits.append(ev.fit_report(m, rows, exclude=args.exclude))
        except ev.FitError as exc:
            raise UsageError(f"{m}: {exc}") from exc
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ev.emit_plots(out, reports=None, fits=fits)
    sys.stdout.write(ev.fits_csv(fits))
    return 0


def cmd_pooling_bench(args):
    cfg = sensing.SensorConfig()
    rows = []
    for n in args.n:
        if n < 1:
            raise UsageError(f"sector size must be positive, got {n}")
        for m in args.methods:
            mean, std = sensing.pooling_bench(n, m, repeats=args.repeats, seed=args.seed, cfg=cfg, scene=args.scene)
            rows.append((m, n, mean, std))
    text = sensing.bench_csv(rows)
    if args.out:
        atomic_write_text(args.out, text)
    sys.stdout.write(text)
    return 0


# -- parser -----------------------------------------------------------------

def _probability(text):
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def build_parser():
    ap = argparse.ArgumentParser(prog="asvlab", description="ASV path following and collision avoidance with PPO.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-scenario", help="sample a random path-with-obstacles scenario")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--config", help="JSON run configuration; its 'scenario' section is used")
    g.add_argument("--N-o", dest="N_o", type=int, help="obstacle count")
    g.add_argument("--L-p", dest="L_p", type=float, help="start-to-goal distance in meters")
    g.add_argument("--mu-r", dest="mu_r", type=float, help="mean obstacle radius")
    g.add_argument("--sigma-d", dest="sigma_d", type=float, help="lateral obstacle offset std")
    g.add_argument("--waypoints", type=int, nargs=2, metavar=("MIN", "MAX"), help="interior waypoint count range")
    g.set_defaults(func=cmd_generate_scenario)

    t = sub.add_parser("train", help="train a PPO agent")
    t.add_argument("--config", help="JSON run configuration merged over the defaults")
    t.add_argument("--out", required=True, help="output directory for checkpoint, metrics and config echo")
    t.add_argument("--seed", type=int)
    t.add_argument("--steps", type=int, help="total environment steps")
    t.add_argument("--resume", action="store_true", help="continue from the checkpoint in --out")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="lambda sweep with deterministic actions")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--lambda", dest="lam", type=_probability, nargs="+", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help="directory for sweep.csv")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("replay", help="record one episode's trajectory")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--scenario", required=True, help="scenario file or built-in name A, B, C, D")
    r.add_argument("--lambda", dest="lam", type=_probability, required=True)
    r.add_argument("--trace-out", required=True)
    r.add_argument("--scene-out", help="also write the path and obstacles as CSV")
    r.set_defaults(func=cmd_replay)

    f = sub.add_parser("fit-curves", help="fit trend models to an evaluation report")
    f.add_argument("--report", required=True)
    f.add_argument("--model", nargs="+", default=["all"], choices=sorted(ev.MODELS) + ["all"])
    f.add_argument("--exclude", type=int, nargs="*", default=[], help="report row indices to leave out")
    f.add_argument("--out", help="directory for fits.csv and fitted curves")
    f.set_defaults(func=cmd_fit_curves)

    b = sub.add_parser("pooling-bench", help="per-sector pooling latency")
    b.add_argument("--n", type=int, nargs="+", default=[3, 5, 9, 15, 25, 45, 75])
    b.add_argument("--methods", nargs="+", default=list(sensing.POOLING_METHODS), choices=sensing.POOLING_METHODS)
    b.add_argument("--repeats", type=int, default=2000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--scene", choices=("random", "ramp"), default="random")
    b.add_argument("--out")
    b.set_defaults(func=cmd_pooling_bench)
    return ap


def main(argv=None):
    level = os.environ.get("ASVLAB_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"asvlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, TrainingError, dynamics.IntegrationError, ValueError) as exc:
        print(f"asvlab {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
