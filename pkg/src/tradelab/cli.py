"""Command-line entry points.

Verbs:
  run <config.json>                    execute one experiment
  sweep <config.json> --axis --values  one run per axis value
  plot <artifacts-dir>                 emit SVG panels from artifacts
  replay <checkpoint> <path.csv>       roll a saved policy over a path

Exit codes: 0 success, 1 configuration error, 2 runtime fault.  The
worker count is taken from TRADELAB_WORKERS (default 1).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import agent_dqn, agent_ppo, agent_q
from .env import run_policy
from .experiment import (ConfigError, ExperimentConfig, recipe,
                         run_experiment, run_sweep)
from .plots import emit_plots
from .sim import load_path_csv


def _load_config(path_or_name: str) -> ExperimentConfig:
    p = Path(path_or_name)
    if p.exists():
        try:
            return ExperimentConfig.from_json(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {p}: {exc}") from exc
    # allow recipe names like gaussian_1f:dqn for quick starts
    if ":" in path_or_name:
        market, kind = path_or_name.split(":", 1)
        return recipe(market, kind)
    raise ConfigError(f"config file {path_or_name!r} not found")


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if args.outdir:
        cfg.outdir = args.outdir
    if args.seed is not None:
        cfg.seed = args.seed
    art = run_experiment(cfg, workers=args.workers)
    print(f"run complete: {len(art.rows)} summaries -> {art.outdir} "
          f"(config {art.config_hash})")
    if art.failures:
        print(f"agent failures: {art.failures}", file=sys.stderr)
        return 2
    return 0


def _parse_value(s: str):
    try:
        return json.loads(s)
    except json.JSONDecodeError:
        return s


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    values = [_parse_value(v) for v in args.values]
    table = run_sweep(cfg, args.axis, values, outdir=args.outdir)
    for row in table:
        print(f"{args.axis}={row['value']}: bench SR {row['bench_sr']:.3f}, "
              f"agent SR {row['agent_sr_mean']:.3f} "
              f"+- {row['agent_sr_std']:.3f}")
    return 0


def _cmd_plot(args) -> int:
    written, report = emit_plots(args.artifacts)
    for note in report:
        print(f"skipped: {note}", file=sys.stderr)
    for f in written:
        print(f)
    if not written:
        print("no plottable artifacts found", file=sys.stderr)
        return 2
    return 0


def _load_policy(checkpoint: str):
    p = Path(checkpoint)
    if p.suffix == ".npz":
        with np.load(p) as data:
            keys = set(data.keys())
        if "log_std" in keys:
            return agent_ppo.deterministic_policy(agent_ppo.PpoAgent.load(p))
        if "action_values" in keys:
            return agent_dqn.greedy_policy(agent_dqn.DqnAgent.load(p))
        raise ConfigError(f"unrecognized checkpoint format: {checkpoint}")
    # tabular checkpoints are a .npz/.json pair addressed by prefix
    prefix = str(p.with_suffix("")) if p.suffix == ".json" else str(p)
    return agent_q.greedy_policy(agent_q.QTable.load(prefix))


def _cmd_replay(args) -> int:
    policy = _load_policy(args.checkpoint)
    path = load_path_csv(args.path)
    from .env import EnvConfig
    env_cfg = EnvConfig(gamma=args.gamma, lam=args.lam,
                        sigma_sq=args.sigma_sq)
    perf = run_policy(env_cfg, path, policy, agent_id="replay")
    out = args.out or str(Path(args.checkpoint).with_suffix("")) + "_replay.csv"
    perf.to_csv(out)
    print(f"replayed {len(perf)} steps, cumulative net PnL "
          f"{perf.cum_net_pnl():.4f} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tradelab", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    run_p = sub.add_parser("run", help="run one experiment config")
    run_p.add_argument("config", help="config JSON file or recipe "
                       "name like gaussian_1f:dqn")
    run_p.add_argument("--outdir")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--workers", type=int, default=None)
    run_p.set_defaults(fn=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a parameter sweep")
    sweep_p.add_argument("config")
    sweep_p.add_argument("--axis", required=True,
                         help="dotted config path, e.g. market.half_lives.0")
    sweep_p.add_argument("--values", nargs="+", required=True)
    sweep_p.add_argument("--outdir")
    sweep_p.set_defaults(fn=_cmd_sweep)

    plot_p = sub.add_parser("plot", help="emit SVG plots from artifacts")
    plot_p.add_argument("artifacts")
    plot_p.set_defaults(fn=_cmd_plot)

    rep_p = sub.add_parser("replay", help="roll a checkpoint over a path CSV")
    rep_p.add_argument("checkpoint")
    rep_p.add_argument("path")
    rep_p.add_argument("--out")
    rep_p.add_argument("--gamma", type=float, default=0.01)
    rep_p.add_argument("--lam", type=float, default=0.001)
    rep_p.add_argument("--sigma-sq", type=float, default=1e-4)
    rep_p.set_defaults(fn=_cmd_replay)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime fault
        print(f"runtime fault: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
