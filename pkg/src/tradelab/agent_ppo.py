"""Continuous-action PPO actor-critic with separate networks.

The actor outputs the mean of a Gaussian whose std is a single learned
global parameter; sampled raw actions are tanh-squashed and rescaled to
the calibrated action bound.  Training is on-policy and episodic:
collect one episode on a fresh path, compute truncated GAE, run up to
three epochs of clipped-surrogate minibatch updates (advantages are
recomputed between epochs), then discard the experience.

Log-probabilities are densities of the raw Gaussian draw; the tanh
rescaling enters the environment only, not the policy ratio.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import List, Optional

import numpy as np

from .env import (OBSERVE_RETURN, EnvConfig, State, observation_series,
                  step)
from .nn import AdamState, Mlp, adam_step, mse_loss
from .sim import MarketParams, MarketPath, simulate

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PpoConfig:
    hidden: tuple = (256, 128)
    clip_eps: float = 0.2
    c1: float = 0.5               # value-loss weight
    c2: float = 0.01              # entropy-bonus weight
    gae_gamma: float = 0.9
    gae_lambda: float = 0.95
    epochs_per_batch: int = 3
    minibatch: int = 256
    actor_lr: float = 3e-4
    critic_lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    log_std_init: float = 0.0
    episode_len: int = 2000
    bn_momentum: float = 0.9      # input stats refresh per episode

    def __post_init__(self):
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if self.epochs_per_batch < 1:
            raise ValueError("epochs_per_batch must be >= 1")


@dataclass
class Trajectory:
    """One collected episode, plus the GAE quantities once computed."""

    states: np.ndarray        # (T, 2)
    raw_actions: np.ndarray   # (T,) pre-squash Gaussian draws
    log_probs: np.ndarray     # (T,) densities at collection time
    rewards: np.ndarray       # (T,)
    final_state: np.ndarray   # (2,) state after the last step
    advantages: Optional[np.ndarray] = None
    value_targets: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.rewards)


class PpoAgent:
    def __init__(self, config: PpoConfig, action_max: float, seed: int):
        if action_max <= 0:
            raise ValueError("action_max must be positive")
        self.config = config
        self.action_max = float(action_max)
        rng = np.random.default_rng(seed)
        sizes = [2, *config.hidden, 1]
        self.actor = Mlp(sizes, rng, input_norm=True,
                         bn_momentum=config.bn_momentum)
        self.critic = Mlp(sizes, rng, input_norm=True,
                          bn_momentum=config.bn_momentum)
        self.log_std = np.array([config.log_std_init])
        self.opt_actor = AdamState(lr=config.actor_lr, beta1=config.adam_beta1,
                                   beta2=config.adam_beta2, eps=config.adam_eps)
        self.opt_critic = AdamState(lr=config.critic_lr, beta1=config.adam_beta1,
                                    beta2=config.adam_beta2, eps=config.adam_eps)
        self.episodes_trained = 0

    def actor_params(self) -> List[np.ndarray]:
        return self.actor.params() + [self.log_std]

    def mean_action(self, states: np.ndarray) -> np.ndarray:
        return self.actor.forward(states, train=False)[:, 0]

    def values(self, states: np.ndarray) -> np.ndarray:
        return self.critic.forward(states, train=False)[:, 0]

    # -- persistence ------------------------------------------------------
    def save(self, path) -> None:
        arrays = {"log_std": self.log_std,
                  "action_max": np.array(self.action_max),
                  "episodes_trained": np.array(self.episodes_trained),
                  "config_json": np.array(json.dumps(asdict(self.config)))}
        for tag, net in (("actor", self.actor), ("critic", self.critic)):
            for i, p in enumerate(net.params()):
                arrays[f"{tag}_param_{i}"] = p
            for i, b in enumerate(net.buffers()):
                arrays[f"{tag}_buffer_{i}"] = b
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "PpoAgent":
        with np.load(path) as data:
            cfg_d = json.loads(str(data["config_json"]))
            cfg_d["hidden"] = tuple(cfg_d["hidden"])
            agent = cls(PpoConfig(**cfg_d), float(data["action_max"]), seed=0)
            agent.log_std[...] = data["log_std"]
            agent.episodes_trained = int(data["episodes_trained"])
            for tag, net in (("actor", agent.actor), ("critic", agent.critic)):
                for i, p in enumerate(net.params()):
                    p[...] = data[f"{tag}_param_{i}"]
                for i, b in enumerate(net.buffers()):
                    b[...] = data[f"{tag}_buffer_{i}"]
        return agent


def gaussian_log_prob(raw, mu, sigma):
    z = (raw - mu) / sigma
    return -0.5 * z * z - np.log(sigma) - 0.5 * LOG_2PI


def sample_action(agent: PpoAgent, s: State, rng: np.random.Generator,
                  deterministic: bool = False):
    """Draw (action, log_prob, raw); deterministic evaluation takes the
    mean, and the action is action_max * tanh(raw)."""
    mu = float(agent.actor.forward([s.y, s.h_prev], train=False)[0, 0])
    sigma = float(np.exp(agent.log_std[0]))
    raw = mu if deterministic else mu + sigma * rng.standard_normal()
    action = agent.action_max * math.tanh(raw)
    log_prob = float(gaussian_log_prob(raw, mu, sigma))
    return action, log_prob, raw


def compute_gae(rewards, values, gae_gamma: float, gae_lambda: float):
    """Truncated GAE: backward recursion A_t = delta_t + (gamma*lam) A_{t+1}
    over delta_t = r_t + gamma V(s_{t+1}) - V(s_t); values has length T+1
    (bootstrap value appended, zero at a true terminal state)."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    t = len(rewards)
    if len(values) != t + 1:
        raise ValueError(f"values must have length T+1={t + 1}, "
                         f"got {len(values)}")
    delta = rewards + gae_gamma * values[1:] - values[:-1]
    adv = np.empty(t)
    acc = 0.0
    decay = gae_gamma * gae_lambda
    for i in range(t - 1, -1, -1):
        acc = delta[i] + decay * acc
        adv[i] = acc
    return adv, adv + values[:-1]


def clipped_surrogate(log_prob_new, log_prob_old, advantage,
                      clip_eps: float) -> np.ndarray:
    """Per-sample min(r A, clip(r, 1-eps, 1+eps) A) with
    r = exp(log_prob_new - log_prob_old)."""
    r = np.exp(np.asarray(log_prob_new) - np.asarray(log_prob_old))
    a = np.asarray(advantage)
    return np.minimum(r * a, np.clip(r, 1.0 - clip_eps, 1.0 + clip_eps) * a)


def entropy(agent: PpoAgent) -> float:
    """Gaussian entropy 0.5 log(2 pi e sigma^2)."""
    return 0.5 * (LOG_2PI + 1.0) + float(agent.log_std[0])


def ppo_update(agent: PpoAgent, traj: Trajectory,
               rng: np.random.Generator) -> dict:
    """Up to epochs_per_batch sweeps of minibatch updates on one episode.

    Advantages are recomputed from the current critic at the start of
    every sweep, normalized per batch, then held fixed within the sweep.
    """
    cfg = agent.config
    t = len(traj)
    states_aug = np.vstack([traj.states, traj.final_state[None, :]])
    diag = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": entropy(agent),
            "log_std": float(agent.log_std[0]), "n_updates": 0}

    # reference density for the clip ratio, evaluated just before the
    # first sweep: identical to the collection-time log-probs unless the
    # input normalization stats were refreshed in between, in which case
    # the refresh must not register as policy movement
    mu0 = agent.mean_action(traj.states)
    sigma0 = float(np.exp(agent.log_std[0]))
    logp_ref = gaussian_log_prob(traj.raw_actions, mu0, sigma0)

    for _ in range(cfg.epochs_per_batch):
        values = agent.values(states_aug)
        adv, vtarg = compute_gae(traj.rewards, values,
                                 cfg.gae_gamma, cfg.gae_lambda)
        traj.advantages, traj.value_targets = adv, vtarg
        astd = adv.std()
        norm_adv = (adv - adv.mean()) / astd if astd > 1e-12 else adv

        order = rng.permutation(t)
        n_mb = max(1, t // cfg.minibatch)
        for chunk in np.array_split(order, n_mb):
            mb_states = traj.states[chunk]
            mb_raw = traj.raw_actions[chunk]
            mb_logp_old = logp_ref[chunk]
            mb_adv = norm_adv[chunk]
            n = len(chunk)

            # actor: maximize clipped surrogate + entropy bonus
            mu = agent.actor.forward(mb_states, train=False)[:, 0]
            sigma = float(np.exp(agent.log_std[0]))
            z = (mb_raw - mu) / sigma
            logp_new = -0.5 * z * z - agent.log_std[0] - 0.5 * LOG_2PI
            ratio = np.exp(logp_new - mb_logp_old)
            surr1 = ratio * mb_adv
            surr2 = np.clip(ratio, 1.0 - cfg.clip_eps,
                            1.0 + cfg.clip_eps) * mb_adv
            obj = np.minimum(surr1, surr2)
            dobj_dlogp = np.where(surr1 <= surr2, ratio * mb_adv, 0.0) / n
            dmu = dobj_dlogp * z / sigma                   # d obj / d mu
            dlogstd = float(np.sum(dobj_dlogp * (z * z - 1.0)))
            upstream = -dmu[:, None]                       # minimize -obj
            actor_grads = agent.actor.backward(upstream)
            g_logstd = np.array([-(dlogstd + cfg.c2)])     # entropy bonus
            adam_step(agent.opt_actor, agent.actor_params(),
                      actor_grads + [g_logstd])

            # critic: value regression to the GAE targets
            v = agent.critic.forward(mb_states, train=False)[:, 0]
            vloss, dv = mse_loss(v, vtarg[chunk])
            critic_grads = agent.critic.backward(cfg.c1 * dv[:, None])
            adam_step(agent.opt_critic, agent.critic.params(), critic_grads)

            diag["policy_loss"] = float(-np.mean(obj))
            diag["value_loss"] = vloss
            diag["n_updates"] += 1

    diag["entropy"] = entropy(agent)
    diag["log_std"] = float(agent.log_std[0])
    return diag


def collect_episode(agent: PpoAgent, env_cfg: EnvConfig, path: MarketPath,
                    rng: np.random.Generator, start_h: float = 0.0,
                    obs: Optional[np.ndarray] = None):
    """Roll the stochastic policy for episode_len steps; returns the
    trajectory and its mean reward."""
    t_len = agent.config.episode_len
    if path.horizon < t_len + 1:
        raise ValueError(f"path of length {path.horizon} too short for "
                         f"an episode of {t_len}")
    seen = path.returns if obs is None else obs
    states = np.empty((t_len, 2))
    raws = np.empty(t_len)
    logps = np.empty(t_len)
    rewards = np.empty(t_len)
    h = start_h
    for t in range(t_len):
        state = State(y=float(seen[t]), h_prev=h)
        action, logp, raw = sample_action(agent, state, rng)
        out = step(env_cfg, state, action, float(path.returns[t + 1]))
        states[t] = (state.y, state.h_prev)
        raws[t] = raw
        logps[t] = logp
        rewards[t] = out.reward
        h = out.next_state.h_prev
    traj = Trajectory(states=states, raw_actions=raws, log_probs=logps,
                      rewards=rewards,
                      final_state=np.array([float(seen[t_len]), h]))
    return traj, float(rewards.mean())


def collect_and_train(agent: PpoAgent, env_cfg: EnvConfig,
                      market: MarketParams, episodes: int, seed: int,
                      log_rows: Optional[list] = None,
                      path_seed_offset: int = 1_000_000_007,
                      observe: str = OBSERVE_RETURN) -> list:
    """On-policy loop over freshly simulated paths.

    Episode e uses path seed seed + path_seed_offset + e; the training
    log rows are (episode, mean_reward, policy_loss, value_loss,
    entropy, log_std).
    """
    rng = np.random.default_rng(seed)
    rows = log_rows if log_rows is not None else []
    for _ in range(episodes):
        e = agent.episodes_trained
        path = simulate(market, agent.config.episode_len + 1,
                        seed + path_seed_offset + e)
        obs = observation_series(path, observe)
        traj, mean_reward = collect_episode(agent, env_cfg, path, rng,
                                            obs=obs)
        agent.actor.update_input_stats(traj.states)
        agent.critic.update_input_stats(traj.states)
        diag = ppo_update(agent, traj, rng)
        agent.episodes_trained += 1
        rows.append((agent.episodes_trained, mean_reward,
                     diag["policy_loss"], diag["value_loss"],
                     diag["entropy"], diag["log_std"]))
    return rows


def deterministic_policy(agent: PpoAgent):
    """Evaluation policy: action_max * tanh(mean), no sampling."""

    def policy(state: State) -> float:
        mu = float(agent.actor.forward([state.y, state.h_prev],
                                       train=False)[0, 0])
        return agent.action_max * math.tanh(mu)

    return policy
