"""Performance series, Sharpe ratio and benchmark-relative summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

ANNUALIZATION = math.sqrt(252.0)  # one step = one trading day

RATIO = "ratio"
DIFFERENCE = "difference"


@dataclass
class PerfSeries:
    """Per-step record of one out-of-sample run."""

    y: np.ndarray         # return realized during the step
    holding: np.ndarray   # post-trade holding h_t
    action: np.ndarray    # traded amount dh_t
    reward: np.ndarray
    net_pnl: np.ndarray
    cost: np.ndarray
    agent_id: str = ""
    seed: Optional[int] = None
    checkpoint: Optional[int] = None

    def __post_init__(self):
        n = len(self.net_pnl)
        for name in ("y", "holding", "action", "reward", "cost"):
            arr = getattr(self, name)
            if len(arr) != n:
                raise ValueError(f"{name} length {len(arr)} != {n}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in {name}")

    def __len__(self) -> int:
        return len(self.net_pnl)

    def cum_net_pnl(self) -> float:
        return float(np.sum(self.net_pnl))

    def to_csv(self, path) -> None:
        cols = (self.y, self.holding, self.action, self.reward,
                self.net_pnl, self.cost)
        with open(path, "w") as fh:
            fh.write("t,y,h,dh,reward,net_pnl,cost\n")
            for t in range(len(self)):
                fh.write(str(t) + "," +
                         ",".join(repr(float(c[t])) for c in cols) + "\n")

    @classmethod
    def from_csv(cls, path, **meta) -> "PerfSeries":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        col = {name: np.array([float(r[i]) for r in rows])
               for i, name in enumerate(header)}
        return cls(y=col["y"], holding=col["h"], action=col["dh"],
                   reward=col["reward"], net_pnl=col["net_pnl"],
                   cost=col["cost"], **meta)


@dataclass
class Summary:
    """Headline numbers for one run against its benchmark."""

    cum_net_pnl: float
    sharpe: float
    relative_to_benchmark: float
    mode: str = RATIO


def sharpe(net_pnl: Sequence[float]) -> float:
    """Annualized Sharpe ratio: mean/std (population) times sqrt(252)."""
    x = np.asarray(net_pnl, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least 2 observations")
    std = float(np.std(x))
    if std == 0.0:
        raise ValueError("zero variance: Sharpe ratio undefined")
    return float(np.mean(x)) / std * ANNUALIZATION


def compare(agent: PerfSeries, bench: PerfSeries, mode: str = RATIO) -> Summary:
    """Summarize an agent run relative to the benchmark on the same path.

    Ratio mode divides cumulative net PnLs and refuses non-positive
    benchmark PnL (switch to difference mode for those markets, where
    the benchmark can lose money).
    """
    if len(agent) != len(bench):
        raise ValueError(f"length mismatch: {len(agent)} vs {len(bench)}")
    a_cum = agent.cum_net_pnl()
    b_cum = bench.cum_net_pnl()
    if mode == RATIO:
        if b_cum <= 0.0:
            raise ValueError("benchmark cumulative net PnL is not positive; "
                             "use difference mode")
        rel = a_cum / b_cum
    elif mode == DIFFERENCE:
        rel = a_cum - b_cum
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return Summary(cum_net_pnl=a_cum, sharpe=sharpe(agent.net_pnl),
                   relative_to_benchmark=rel, mode=mode)


@dataclass
class Aggregate:
    """Across-run mean/std with the per-run dots preserved for plotting."""

    mean_cum_net_pnl: float
    std_cum_net_pnl: float
    mean_sharpe: float
    std_sharpe: float
    mean_relative: float
    std_relative: float
    runs: List[Summary] = field(default_factory=list)


def aggregate(runs: Sequence[Summary]) -> Aggregate:
    """Mean and population std across runs."""
    if not runs:
        raise ValueError("no runs to aggregate")
    cums = np.array([r.cum_net_pnl for r in runs])
    srs = np.array([r.sharpe for r in runs])
    rels = np.array([r.relative_to_benchmark for r in runs])
    return Aggregate(
        mean_cum_net_pnl=float(cums.mean()), std_cum_net_pnl=float(cums.std()),
        mean_sharpe=float(srs.mean()), std_sharpe=float(srs.std()),
        mean_relative=float(rels.mean()), std_relative=float(rels.std()),
        runs=list(runs))
