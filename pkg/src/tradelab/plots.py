"""Static SVG figures from run artifacts.

Each panel is emitted independently; a panel whose inputs are missing is
skipped with a report instead of failing the whole call.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import agent_dqn, agent_ppo, agent_q
from .env import State

HOLDINGS_WINDOW = 500  # snapshot length for the holdings overlay


def _read_table(path: Path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.shape == ():  # single row
        data = data.reshape(1)
    return data


def _load_meta(outdir: Path) -> Optional[dict]:
    meta_path = outdir / "meta.json"
    if not meta_path.exists():
        return None
    return json.loads(meta_path.read_text())


def _load_config(outdir: Path) -> Optional[dict]:
    cfg_path = outdir / "config.json"
    if not cfg_path.exists():
        return None
    return json.loads(cfg_path.read_text())


def plot_learning_curves(outdir: Path, report: list) -> List[Path]:
    summary = outdir / "summary.csv"
    aggregate = outdir / "aggregate.csv"
    if not (summary.exists() and aggregate.exists()):
        report.append("learning curves: summary/aggregate tables missing")
        return []
    rows = _read_table(summary)
    agg = _read_table(aggregate)
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    for ax, dot_col, mean_col, bench_col, label in (
            (axes[0], "agent_cum", "agent_cum_mean", "bench_cum",
             "cumulative net PnL"),
            (axes[1], "agent_sr", "agent_sr_mean", "bench_sr",
             "Sharpe ratio")):
        agents = np.unique(rows["agent"])
        for a in agents:
            sel = rows["agent"] == a
            cps = np.unique(rows["checkpoint"][sel])
            dots = [rows[dot_col][sel & (rows["checkpoint"] == cp)].mean()
                    for cp in cps]
            ax.plot(cps, dots, "o", ms=4, alpha=0.5, color="tab:blue")
        ax.plot(agg["checkpoint"], agg[mean_col], "-", color="tab:blue",
                label="agent average")
        ax.axhline(float(np.mean(agg[bench_col])), ls="--", color="black",
                   label="benchmark")
        ax.set_xlabel("training checkpoint")
        ax.set_ylabel(label)
        ax.legend(fontsize=8)
    fig.tight_layout()
    out = outdir / "learning_curves.svg"
    fig.savefig(out)
    plt.close(fig)
    return [out]


def _final_checkpoints(outdir: Path, meta: dict, kind: str) -> list:
    cp = meta["checkpoints"][-1]
    found = []
    for d in sorted(outdir.glob("agent_*")):
        if kind == "q":
            prefix = d / f"checkpoint_{cp}"
            if prefix.with_suffix(".npz").exists():
                found.append((d.name, str(prefix)))
        else:
            p = d / f"checkpoint_{cp}.npz"
            if p.exists():
                found.append((d.name, str(p)))
    return found


def _greedy_action_fn(kind: str, path: str):
    if kind == "dqn":
        agent = agent_dqn.DqnAgent.load(path)
        return lambda y, h: float(agent.action_values[int(np.argmax(
            agent_dqn.greedy_q(agent, State(y=y, h_prev=h))))])
    if kind == "ppo":
        agent = agent_ppo.PpoAgent.load(path)
        pol = agent_ppo.deterministic_policy(agent)
        return lambda y, h: pol(State(y=y, h_prev=h))
    table = agent_q.QTable.load(path)
    pol = agent_q.greedy_policy(table)
    return lambda y, h: pol(State(y=y, h_prev=h))


def _y_grid(outdir: Path, meta: dict) -> np.ndarray:
    bench = sorted((outdir / "bench").glob("perf_cp*_test*.csv")) \
        if (outdir / "bench").exists() else []
    if bench:
        ys = _read_table(bench[0])["y"]
        lim = float(np.quantile(np.abs(ys), 0.99))
    else:
        lim = 3.0 * float(np.sqrt(meta.get("sigma_sq", 1e-4))) * 3
    return np.linspace(-lim, lim, 81)


def plot_value_slice(outdir: Path, report: list) -> List[Path]:
    """Q(y, h=0, a) per action for the first DQN agent (value-based only)."""
    cfg = _load_config(outdir)
    meta = _load_meta(outdir)
    if not (cfg and meta) or cfg["agent"]["kind"] != "dqn":
        report.append("value slice: needs a DQN run")
        return []
    found = _final_checkpoints(outdir, meta, "dqn")
    if not found:
        report.append("value slice: no checkpoints found")
        return []
    agent = agent_dqn.DqnAgent.load(found[0][1])
    ys = _y_grid(outdir, meta)
    q = np.array([agent_dqn.greedy_q(agent, State(y=float(y), h_prev=0.0))
                  for y in ys])
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, dh in enumerate(agent.action_values):
        ax.plot(ys, q[:, i], label=f"dh={dh:g}")
    ax.set_xlabel("observed return y (holding fixed at 0)")
    ax.set_ylabel("action value")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = outdir / "value_slice.svg"
    fig.savefig(out)
    plt.close(fig)
    return [out]


def plot_policy_slice(outdir: Path, report: list) -> List[Path]:
    """Greedy action vs return at h=0, mean with an across-agent band."""
    cfg = _load_config(outdir)
    meta = _load_meta(outdir)
    if not (cfg and meta):
        report.append("policy slice: config/meta missing")
        return []
    kind = cfg["agent"]["kind"]
    found = _final_checkpoints(outdir, meta, kind)
    if not found:
        report.append("policy slice: no checkpoints found")
        return []
    ys = _y_grid(outdir, meta)
    acts = []
    for _, ckpt in found:
        fn = _greedy_action_fn(kind, ckpt)
        acts.append([fn(float(y), 0.0) for y in ys])
    acts = np.asarray(acts)
    mean = acts.mean(axis=0)
    std = acts.std(axis=0)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ys, mean, color="tab:blue", label=f"{kind} mean policy")
    ax.fill_between(ys, mean - std, mean + std, alpha=0.3, color="tab:blue")
    ax.set_xlabel("observed return y (holding fixed at 0)")
    ax.set_ylabel("greedy action (shares)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = outdir / "policy_slice.svg"
    fig.savefig(out)
    plt.close(fig)
    return [out]


def plot_holdings(outdir: Path, report: list) -> List[Path]:
    """Agent vs benchmark holdings over a 500-step snapshot; a second
    y-axis appears when the two live on very different scales."""
    agent_csvs = sorted(outdir.glob("agent_0/perf_cp*_test0.csv"))
    if not agent_csvs:
        report.append("holdings: no persisted agent PerfSeries")
        return []
    agent_csv = agent_csvs[-1]
    bench_csv = outdir / "bench" / agent_csv.name
    if not bench_csv.exists():
        report.append("holdings: matching benchmark PerfSeries missing")
        return []
    ah = _read_table(agent_csv)["h"][:HOLDINGS_WINDOW]
    bh = _read_table(bench_csv)["h"][:HOLDINGS_WINDOW]
    t = np.arange(len(ah))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, ah, color="tab:blue", label="agent")
    scale_a = np.max(np.abs(ah)) or 1.0
    scale_b = np.max(np.abs(bh)) or 1.0
    if max(scale_a, scale_b) / max(min(scale_a, scale_b), 1e-12) > 4.0:
        ax2 = ax.twinx()
        ax2.plot(t, bh, color="tab:orange", label="benchmark (right)")
        ax2.set_ylabel("benchmark holding")
    else:
        ax.plot(t, bh, color="tab:orange", label="benchmark")
    ax.set_xlabel("step")
    ax.set_ylabel("holding (shares)")
    ax.legend(fontsize=8, loc="upper left")
    fig.tight_layout()
    out = outdir / "holdings.svg"
    fig.savefig(out)
    plt.close(fig)
    return [out]


def plot_sensitivity(outdir: Path, report: list) -> List[Path]:
    sweep = outdir / "sweep.csv"
    if not sweep.exists():
        report.append("sensitivity: no sweep.csv (only written by sweeps)")
        return []
    tab = _read_table(sweep)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(tab["value"], tab["bench_sr"], "--", color="black",
            label="benchmark")
    ax.plot(tab["value"], tab["agent_sr_mean"], "-o", color="tab:blue",
            label="agent mean")
    ax.fill_between(tab["value"],
                    tab["agent_sr_mean"] - tab["agent_sr_std"],
                    tab["agent_sr_mean"] + tab["agent_sr_std"],
                    alpha=0.3, color="tab:blue")
    ax.set_xlabel("swept parameter")
    ax.set_ylabel("Sharpe ratio")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = outdir / "sensitivity.svg"
    fig.savefig(out)
    plt.close(fig)
    return [out]


def emit_plots(outdir) -> tuple:
    """Emit every panel the artifacts support.

    Returns (written files, skip reports); nothing written means the
    directory held no usable artifacts.
    """
    outdir = Path(outdir)
    written: List[Path] = []
    report: list = []
    for fn in (plot_learning_curves, plot_value_slice, plot_policy_slice,
               plot_holdings, plot_sensitivity):
        try:
            written.extend(fn(outdir, report))
        except Exception as exc:  # a bad panel must not sink the others
            report.append(f"{fn.__name__}: failed ({exc})")
    return written, report
