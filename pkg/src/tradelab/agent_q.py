"""Tabular Q-learning over discretized return/holding/action grids.

The grids follow lot/basis-point conventions: actions and holdings are
multiples of a fixed lot, returns are spaced by a basis point, all three
sets symmetric about zero.  Exploration is epsilon-greedy with linear
decay.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .benchmark import ActionRange
from .env import EnvConfig, State, step
from .schedules import LinearSchedule
from .sim import MarketPath


@dataclass(frozen=True)
class DiscreteGrids:
    """Sorted, symmetric grids for returns, holdings and actions."""

    returns: np.ndarray
    holdings: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        for name in ("returns", "holdings", "actions"):
            g = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, g)
            if len(g) < 3 or len(g) % 2 == 0:
                raise ValueError(f"{name} grid must have odd size >= 3")
            if not np.all(np.diff(g) > 0):
                raise ValueError(f"{name} grid must be strictly increasing")
            if abs(g[0] + g[-1]) > 1e-9 * max(1.0, abs(g[-1])):
                raise ValueError(f"{name} grid must be symmetric about 0")

    @classmethod
    def default(cls, action_range: ActionRange,
                ret_bound: float = 0.05, bp: float = 1e-3,
                max_holding: float = 100_000.0, lot: float = 1000.0,
                k_actions: int = 2) -> "DiscreteGrids":
        """Paper-style grids: |A| = 2K+1 lot multiples sized to the
        calibrated range, |H| holdings of +-max_holding in lots, returns
        bounded at +-ret_bound in bp steps."""
        n_ret = int(round(ret_bound / bp))
        returns = bp * np.arange(-n_ret, n_ret + 1)
        m_lots = int(round(max_holding / lot))
        holdings = lot * np.arange(-m_lots, m_lots + 1)
        # actions are the largest lot multiples that keep the extreme
        # trade inside the calibrated upper bound (at least one lot)
        unit = max(1.0, action_range.hi // (k_actions * lot)) * lot
        actions = unit * np.arange(-k_actions, k_actions + 1)
        return cls(returns=returns, holdings=holdings, actions=actions)

    @property
    def table_size(self) -> int:
        return len(self.returns) * len(self.holdings) * len(self.actions)


def _nearest_bin(grid: np.ndarray, value: float) -> int:
    """Nearest grid index; midpoints resolve to the lower bin and
    out-of-range values clamp to the edges."""
    step_ = grid[1] - grid[0]
    x = (value - grid[0]) / step_
    idx = int(np.ceil(x - 0.5 - 1e-9))
    return min(max(idx, 0), len(grid) - 1)


def discretize(grids: DiscreteGrids, s: State) -> Tuple[int, int]:
    """Map a continuous state to (return_bin, holding_bin)."""
    return (_nearest_bin(grids.returns, s.y),
            _nearest_bin(grids.holdings, s.h_prev))


@dataclass
class QTable:
    grids: DiscreteGrids
    alpha: float = 0.1
    rho: float = 0.99
    epsilon: LinearSchedule = field(
        default_factory=lambda: LinearSchedule(1.0, 0.01, 1))
    visit_decay: bool = False  # alpha / visit-count schedule
    q: np.ndarray = None
    visits: np.ndarray = None

    def __post_init__(self):
        shape = (len(self.grids.returns), len(self.grids.holdings),
                 len(self.grids.actions))
        if self.q is None:
            self.q = np.zeros(shape)
        if self.visits is None:
            self.visits = np.zeros(shape, dtype=np.int64)
        if self.q.shape != shape:
            raise ValueError(f"table shape {self.q.shape} != {shape}")

    def fraction_unvisited(self) -> float:
        return float(np.mean(self.visits == 0))

    def save(self, path_prefix: str) -> None:
        """Binary table + JSON grid metadata next to it."""
        np.savez(path_prefix + ".npz", q=self.q, visits=self.visits)
        meta = {"returns": list(self.grids.returns),
                "holdings": list(self.grids.holdings),
                "actions": list(self.grids.actions),
                "alpha": self.alpha, "rho": self.rho,
                "visit_decay": self.visit_decay,
                "epsilon": [self.epsilon.start, self.epsilon.end,
                            self.epsilon.decay_steps]}
        with open(path_prefix + ".json", "w") as fh:
            json.dump(meta, fh, indent=1)

    @classmethod
    def load(cls, path_prefix: str) -> "QTable":
        with open(path_prefix + ".json") as fh:
            meta = json.load(fh)
        grids = DiscreteGrids(returns=np.array(meta["returns"]),
                              holdings=np.array(meta["holdings"]),
                              actions=np.array(meta["actions"]))
        data = np.load(path_prefix + ".npz")
        eps = meta["epsilon"]
        return cls(grids=grids, alpha=meta["alpha"], rho=meta["rho"],
                   visit_decay=meta["visit_decay"],
                   epsilon=LinearSchedule(eps[0], eps[1], int(eps[2])),
                   q=data["q"], visits=data["visits"])


def q_update(table: QTable, s_bins: Tuple[int, int], a_idx: int,
             r: float, next_bins: Tuple[int, int]) -> None:
    """One Q-learning update toward r + rho * max_a' Q(s', a')."""
    ri, hi = s_bins
    table.visits[ri, hi, a_idx] += 1
    alpha = table.alpha
    if table.visit_decay:
        alpha = table.alpha / table.visits[ri, hi, a_idx]
    target = r + table.rho * table.q[next_bins[0], next_bins[1]].max()
    table.q[ri, hi, a_idx] += alpha * (target - table.q[ri, hi, a_idx])


def epsilon_greedy(table: QTable, s_bins: Tuple[int, int], eps: float,
                   rng: np.random.Generator) -> int:
    """Greedy action (ties to the smallest index) w.p. 1-eps, else uniform."""
    n = len(table.grids.actions)
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(n))
    return int(np.argmax(table.q[s_bins[0], s_bins[1]]))


def train_on_path(table: QTable, cfg: EnvConfig, path: MarketPath,
                  rng: np.random.Generator, start_h: float = 0.0,
                  t_start: int = 0, n_steps: Optional[int] = None,
                  obs: Optional[np.ndarray] = None) -> dict:
    """Run the epsilon-greedy learner over one simulated series segment.

    Returns simple training diagnostics; the table is updated in place.
    The epsilon schedule is indexed by the global step t_start + k.
    ``obs`` optionally replaces the agent-visible return stream.
    """
    if n_steps is None:
        n_steps = path.horizon - 1 - t_start
    if t_start + n_steps > path.horizon - 1:
        raise ValueError("path too short for requested segment")
    seen = path.returns if obs is None else obs
    h = start_h
    total_reward = 0.0
    for k in range(n_steps):
        t = t_start + k
        state = State(y=float(seen[t]), h_prev=h)
        s_bins = discretize(table.grids, state)
        eps = table.epsilon.value(t)
        a_idx = epsilon_greedy(table, s_bins, eps, rng)
        dh = float(table.grids.actions[a_idx])
        out = step(cfg, state, dh, float(path.returns[t + 1]))
        h = out.next_state.h_prev
        next_bins = discretize(table.grids, State(y=float(seen[t + 1]),
                                                  h_prev=h))
        q_update(table, s_bins, a_idx, out.reward, next_bins)
        total_reward += out.reward
    return {"steps": n_steps, "mean_reward": total_reward / max(n_steps, 1),
            "fraction_unvisited": table.fraction_unvisited(),
            "final_h": h}


def greedy_policy(table: QTable):
    """Deterministic policy reading the argmax action from the table."""

    def policy(state: State) -> float:
        s_bins = discretize(table.grids, state)
        a_idx = int(np.argmax(table.q[s_bins[0], s_bins[1]]))
        return float(table.grids.actions[a_idx])

    return policy
