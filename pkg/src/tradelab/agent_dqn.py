"""Double DQN over the continuous (return, holding) state with a small
discrete action grid.

Uniform-replay batches, Huber loss on the double-estimator bootstrap
target (online net selects the action, target net evaluates it), soft
target tracking theta_minus <- tau * theta_minus + (1 - tau) * theta,
epsilon-greedy exploration with linear decay.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from typing import List, Optional, Tuple

import numpy as np

from .benchmark import ActionRange
from .env import EnvConfig, State, step
from .nn import (AdamState, Mlp, adam_step, huber_loss, soft_update)
from .schedules import LinearSchedule
from .sim import MarketPath


@dataclass(frozen=True)
class Transition:
    s: Tuple[float, float]
    a: int
    r: float
    s_next: Tuple[float, float]


class ReplayBuffer:
    """Fixed-capacity FIFO store with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int = 2):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros(capacity, dtype=np.int64)
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._count = 0  # total insertions ever

    def __len__(self) -> int:
        return min(self._count, self.capacity)

    def add(self, s, a: int, r: float, s_next) -> None:
        i = self._count % self.capacity
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s_next
        self._count += 1

    def sample(self, n: int, rng: np.random.Generator):
        """Uniform sampling with replacement."""
        size = len(self)
        if size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, size, size=n)
        return self._s[idx], self._a[idx], self._r[idx], self._s2[idx]

    def chronological(self) -> List[Transition]:
        """Stored transitions from oldest to newest."""
        size = len(self)
        start = self._count % self.capacity if self._count > self.capacity else 0
        order = [(start + k) % self.capacity for k in range(size)]
        return [Transition(s=tuple(self._s[i]), a=int(self._a[i]),
                           r=float(self._r[i]), s_next=tuple(self._s2[i]))
                for i in order]


@dataclass(frozen=True)
class DqnConfig:
    hidden: tuple = (256, 128)
    n_actions: int = 5
    rho: float = 0.9              # bootstrap discount
    tau: float = 0.999            # soft target step; 1 freezes the target
    batch_size: int = 256
    lr: float = 0.005
    lr_decay_rate: float = 0.999
    lr_decay_every: int = 100
    adam_beta1: float = 0.5
    adam_beta2: float = 0.75
    adam_eps: float = 0.1
    huber_delta: float = 1.0
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_fraction: float = 0.6     # fraction of training steps spent decaying
    bn_momentum: float = 0.99

    def __post_init__(self):
        if self.n_actions < 2:
            raise ValueError("need at least 2 actions")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")


def action_grid(action_range: ActionRange, n_actions: int = 5) -> np.ndarray:
    """n_actions points linearly spaced over the calibrated range with 0
    forced as the middle point (so the grid size must be odd)."""
    if n_actions % 2 == 0:
        raise ValueError("action grid size must be odd (a zero action)")
    vals = np.linspace(action_range.lo, action_range.hi, n_actions)
    vals[n_actions // 2] = 0.0
    return vals


class DqnAgent:
    def __init__(self, config: DqnConfig, action_values: np.ndarray,
                 train_steps: int, seed: int):
        if len(action_values) != config.n_actions:
            raise ValueError("action grid size mismatch")
        self.config = config
        self.action_values = np.asarray(action_values, dtype=float)
        rng = np.random.default_rng(seed)
        sizes = [2, *config.hidden, config.n_actions]
        self.online = Mlp(sizes, rng, input_norm=True,
                          bn_momentum=config.bn_momentum)
        self.target = self.online.copy()
        self.opt = AdamState(lr=config.lr, beta1=config.adam_beta1,
                             beta2=config.adam_beta2, eps=config.adam_eps,
                             decay_rate=config.lr_decay_rate,
                             decay_every=config.lr_decay_every)
        self.epsilon = LinearSchedule(
            config.eps_start, config.eps_end,
            max(1, int(config.eps_fraction * train_steps)))
        self.total_steps = 0

    # -- persistence ------------------------------------------------------
    def save(self, path) -> None:
        arrays = {"action_values": self.action_values,
                  "total_steps": np.array(self.total_steps),
                  "opt_step": np.array(self.opt.step),
                  "eps_decay_steps": np.array(self.epsilon.decay_steps),
                  "config_json": np.array(json.dumps(asdict(self.config)))}
        for tag, net in (("online", self.online), ("target", self.target)):
            for i, p in enumerate(net.params()):
                arrays[f"{tag}_param_{i}"] = p
            for i, b in enumerate(net.buffers()):
                arrays[f"{tag}_buffer_{i}"] = b
        if self.opt.m is not None:
            for i, m in enumerate(self.opt.m):
                arrays[f"opt_m_{i}"] = m
                arrays[f"opt_v_{i}"] = self.opt.v[i]
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "DqnAgent":
        with np.load(path) as data:
            cfg_d = json.loads(str(data["config_json"]))
            cfg_d["hidden"] = tuple(cfg_d["hidden"])
            config = DqnConfig(**cfg_d)
            agent = cls(config, data["action_values"], train_steps=1, seed=0)
            agent.epsilon = LinearSchedule(config.eps_start, config.eps_end,
                                           int(data["eps_decay_steps"]))
            agent.total_steps = int(data["total_steps"])
            for tag, net in (("online", agent.online), ("target", agent.target)):
                for i, p in enumerate(net.params()):
                    p[...] = data[f"{tag}_param_{i}"]
                for i, b in enumerate(net.buffers()):
                    b[...] = data[f"{tag}_buffer_{i}"]
            agent.opt.step = int(data["opt_step"])
            if "opt_m_0" in data:
                agent.opt.m = [np.array(data[f"opt_m_{i}"])
                               for i in range(len(agent.online.params()))]
                agent.opt.v = [np.array(data[f"opt_v_{i}"])
                               for i in range(len(agent.online.params()))]
        return agent


def greedy_q(agent: DqnAgent, s: State) -> np.ndarray:
    """Action-value vector of the online network at one state."""
    return agent.online.forward([s.y, s.h_prev], train=False)[0]


def act(agent: DqnAgent, s: State, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy action index over the online net's Q-vector."""
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(agent.config.n_actions))
    return int(np.argmax(greedy_q(agent, s)))


def ddqn_target(agent: DqnAgent, r: np.ndarray,
                s_next: np.ndarray) -> np.ndarray:
    """r + rho * Q_target(s', argmax_a Q_online(s', a)), per sample."""
    q_online = agent.online.forward(s_next, train=False)
    a_star = np.argmax(q_online, axis=1)
    q_target = agent.target.forward(s_next, train=False)
    rows = np.arange(len(a_star))
    return np.asarray(r) + agent.config.rho * q_target[rows, a_star]


def train_step(agent: DqnAgent, buffer: ReplayBuffer,
               rng: np.random.Generator) -> Optional[float]:
    """One batch update; no-op (returns None) while the buffer is short."""
    cfg = agent.config
    if len(buffer) < cfg.batch_size:
        return None
    s, a, r, s2 = buffer.sample(cfg.batch_size, rng)
    target = ddqn_target(agent, r, s2)

    q = agent.online.forward(s, train=True)
    rows = np.arange(cfg.batch_size)
    pred = q[rows, a]
    loss, dpred = huber_loss(pred, target, cfg.huber_delta)
    upstream = np.zeros_like(q)
    upstream[rows, a] = dpred
    grads = agent.online.backward(upstream)
    adam_step(agent.opt, agent.online.params(), grads)
    soft_update(agent.target, agent.online, cfg.tau)
    return loss


def train_on_path(agent: DqnAgent, buffer: ReplayBuffer, env_cfg: EnvConfig,
                  path: MarketPath, rng: np.random.Generator,
                  h_start: float = 0.0, n_steps: Optional[int] = None,
                  t_start: int = 0,
                  log_rows: Optional[list] = None,
                  log_every: int = 100,
                  obs: Optional[np.ndarray] = None) -> float:
    """Walk the path (one update per environment step) and return the
    holding where training stopped, so runs can continue in segments.
    ``obs`` optionally replaces the agent-visible return stream."""
    if n_steps is None:
        n_steps = path.horizon - 1 - t_start
    if t_start + n_steps > path.horizon - 1:
        raise ValueError("path too short for requested segment")
    seen = path.returns if obs is None else obs
    h = h_start
    for k in range(n_steps):
        t = t_start + k
        state = State(y=float(seen[t]), h_prev=h)
        eps = agent.epsilon.value(agent.total_steps)
        a_idx = act(agent, state, eps, rng)
        dh = float(agent.action_values[a_idx])
        out = step(env_cfg, state, dh, float(path.returns[t + 1]))
        h = out.next_state.h_prev
        buffer.add([state.y, state.h_prev], a_idx, out.reward,
                   [float(seen[t + 1]), h])
        loss = train_step(agent, buffer, rng)
        agent.total_steps += 1
        if log_rows is not None and agent.total_steps % log_every == 0:
            log_rows.append((agent.total_steps,
                             float("nan") if loss is None else loss,
                             eps, agent.opt.current_lr()))
    return h


def greedy_policy(agent: DqnAgent):
    """Deterministic evaluation policy (epsilon = 0)."""

    def policy(state: State) -> float:
        return float(agent.action_values[int(np.argmax(greedy_q(agent, state)))])

    return policy
