"""The trading MDP shared by the benchmark and every agent.

State is the pair (last observed return, current holding); the action
is the traded amount dh; the reward is the risk- and cost-penalized
one-step profit

    R = h y_next - (gamma/2) h^2 Sigma - (1/2) dh^2 Lambda,

with quadratic costs Lambda = lam * Sigma.  Net PnL drops the risk term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import math

import numpy as np

from .benchmark import ActionRange
from .evaluation import PerfSeries
from .sim import MarketPath

ACTION_CLIP_TOL = 1e-9

OBSERVE_RETURN = "return"
OBSERVE_SIGNAL = "signal"


def observation_series(path: MarketPath, mode: str) -> Optional[np.ndarray]:
    """What an agent reads as its return input.

    The default is the observed return itself; ``signal`` mode gives the
    fully informed view b . f_t (the predictable part of the next
    return) for factor markets.  Returns None when the observation is
    just ``path.returns``.
    """
    if mode == OBSERVE_RETURN:
        return None
    if mode == OBSERVE_SIGNAL:
        if path.factors is None:
            raise ValueError("signal observation needs a factor market")
        return path.factors @ np.asarray(path.params.loadings)
    raise ValueError(f"unknown observation mode {mode!r}")


@dataclass(frozen=True)
class EnvConfig:
    gamma: float                 # risk aversion
    lam: float                   # cost multiplier, Lambda = lam * sigma_sq
    sigma_sq: float              # return noise variance (single asset)
    rho: float = 1.0             # discount on the observed reward stream
    r_f: float = 0.0
    episode_len: Optional[int] = None
    action_range: Optional[ActionRange] = None

    def __post_init__(self):
        if self.gamma <= 0 or self.lam <= 0 or self.sigma_sq <= 0:
            raise ValueError("gamma, lam and sigma_sq must be positive")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must be in (0, 1]")

    @property
    def cost_coeff(self) -> float:
        """Lambda = lam * Sigma for the scalar case."""
        return self.lam * self.sigma_sq


@dataclass(frozen=True)
class State:
    y: float       # last observed return
    h_prev: float  # holding carried into the step


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    net_pnl: float
    cost: float
    next_state: State


def _enforce_range(dh: float, rng: ActionRange) -> float:
    if dh < rng.lo:
        if rng.lo - dh < ACTION_CLIP_TOL:
            return rng.lo
        raise ValueError(f"action {dh} below range [{rng.lo}, {rng.hi}]")
    if dh > rng.hi:
        if dh - rng.hi < ACTION_CLIP_TOL:
            return rng.hi
        raise ValueError(f"action {dh} above range [{rng.lo}, {rng.hi}]")
    return dh


def step(cfg: EnvConfig, state: State, dh: float, y_next: float) -> StepOutcome:
    """Advance one step given the trade dh and the realized next return."""
    if not (math.isfinite(dh) and math.isfinite(y_next)
            and math.isfinite(state.y) and math.isfinite(state.h_prev)):
        raise ValueError("non-finite input to step")
    if cfg.action_range is not None:
        dh = _enforce_range(dh, cfg.action_range)
    h = state.h_prev + dh
    gross = h * y_next
    risk = 0.5 * cfg.gamma * h * h * cfg.sigma_sq
    cost = 0.5 * dh * dh * cfg.cost_coeff
    return StepOutcome(reward=gross - risk - cost,
                       net_pnl=gross - cost,
                       cost=cost,
                       next_state=State(y=y_next, h_prev=h))


def run_policy(cfg: EnvConfig, path: MarketPath,
               policy: Callable[[State], float],
               start_h: float = 0.0,
               agent_id: str = "",
               checkpoint: Optional[int] = None,
               obs: Optional[np.ndarray] = None) -> PerfSeries:
    """Drive a policy over a simulated path and record every step.

    The policy sees State(y_t, h) at step t and the environment then
    reveals y_{t+1}; episode_len (or the whole path) steps are taken.
    ``obs`` optionally replaces the policy-visible return stream (the
    reward always uses the true returns).
    """
    n_steps = cfg.episode_len if cfg.episode_len is not None \
        else path.horizon - 1
    if path.horizon < n_steps + 1:
        raise ValueError(f"path of length {path.horizon} too short for "
                         f"{n_steps} steps")
    seen = path.returns if obs is None else obs
    y = np.empty(n_steps)
    holding = np.empty(n_steps)
    action = np.empty(n_steps)
    reward = np.empty(n_steps)
    net_pnl = np.empty(n_steps)
    cost = np.empty(n_steps)

    state = State(y=float(seen[0]), h_prev=start_h)
    for t in range(n_steps):
        dh = policy(state)
        if dh is None or not math.isfinite(dh):
            raise RuntimeError(f"policy returned non-finite action {dh!r} "
                               f"at step {t}")
        out = step(cfg, state, float(dh), float(path.returns[t + 1]))
        y[t] = path.returns[t + 1]
        holding[t] = out.next_state.h_prev
        action[t] = out.next_state.h_prev - state.h_prev
        reward[t] = out.reward
        net_pnl[t] = out.net_pnl
        cost[t] = out.cost
        state = State(y=float(seen[t + 1]), h_prev=out.next_state.h_prev)

    return PerfSeries(y=y, holding=holding, action=action, reward=reward,
                      net_pnl=net_pnl, cost=cost, agent_id=agent_id,
                      seed=path.seed, checkpoint=checkpoint)
