"""Experiment orchestration: configs, seeded multi-agent runs, sweeps.

A run follows the protocol: warm up the closed-form benchmark on its own
fit window, calibrate the RL action range from the benchmark's trade
distribution, train ``num_agents`` agents, and at every checkpoint
evaluate agent and benchmark on the same fresh out-of-sample paths
(seeded ``seed + checkpoint + test_index``).  All artifacts are CSV/JSON
files carrying the config hash and seeds, so reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import traceback
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import agent_dqn, agent_ppo, agent_q
from .benchmark import (ActionRange, EstimatedModel, GpSolution,
                        calibrate_action_range, fit_fully_informed,
                        fit_partially_informed, gp_policy,
                        partially_informed_policy, solve_trading_rate)
from .env import (OBSERVE_RETURN, EnvConfig, observation_series, run_policy)
from .evaluation import PerfSeries, sharpe
from .schedules import LinearSchedule
from .sim import (FactorModelParams, GarchParams, MarketParams, MarketPath,
                  simulate)

PERSIST_CHOICES = ("full", "final", "none")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# --------------------------------------------------------------------------
# config schema
# --------------------------------------------------------------------------

@dataclass
class MarketSpec:
    kind: str = "factor"                  # "factor" | "garch"
    loadings: list = field(default_factory=lambda: [0.00535])
    half_lives: list = field(default_factory=lambda: [350.0])
    factor_vols: list = field(default_factory=lambda: [0.2])
    asset_vol: float = 0.01
    omega: float = 0.01                   # garch fields
    alpha: float = 0.05
    beta: float = 0.94
    ar_coeff: float = 0.9
    noise: str = "gaussian"
    nu: Optional[int] = None
    phi_formula: str = "halving"

    def params(self) -> MarketParams:
        if self.kind == "factor":
            return FactorModelParams(
                loadings=tuple(self.loadings),
                half_lives=tuple(self.half_lives),
                factor_vols=tuple(self.factor_vols),
                asset_vol=self.asset_vol, noise=self.noise, nu=self.nu,
                phi_formula=self.phi_formula)
        if self.kind == "garch":
            return GarchParams(omega=self.omega, alpha=self.alpha,
                               beta=self.beta, ar_coeff=self.ar_coeff,
                               noise=self.noise, nu=self.nu)
        raise ConfigError(f"unknown market kind {self.kind!r}")


@dataclass
class EnvSpec:
    gamma: float = 0.01
    lam: float = 0.001
    rho: float = 1.0            # reward-stream discount (agents discount
    r_f: float = 0.0            # inside their own targets)
    observe: str = OBSERVE_RETURN

    def config(self, sigma_sq: float,
               action_range: Optional[ActionRange] = None,
               episode_len: Optional[int] = None) -> EnvConfig:
        return EnvConfig(gamma=self.gamma, lam=self.lam, sigma_sq=sigma_sq,
                         rho=self.rho, r_f=self.r_f,
                         episode_len=episode_len, action_range=action_range)


@dataclass
class BenchmarkSpec:
    informed: str = "fully"               # "fully" | "partially"
    fit_window: int = 10_000
    candidate_lags: list = field(default_factory=lambda: list(range(1, 11)))


@dataclass
class AgentSpec:
    kind: str = "dqn"                     # "q" | "dqn" | "ppo"
    params: dict = field(default_factory=dict)

    def materialize(self) -> dict:
        """Full hyperparameter dict: stated values over kind defaults."""
        if self.kind == "dqn":
            base = asdict(agent_dqn.DqnConfig())
        elif self.kind == "ppo":
            base = asdict(agent_ppo.PpoConfig())
        elif self.kind == "q":
            base = {"alpha": 0.1, "rho": 0.99, "visit_decay": False,
                    "eps_start": 1.0, "eps_end": 0.01, "eps_fraction": 0.6,
                    "ret_bound": 0.05, "bp": 1e-3,
                    "max_holding": 100_000.0, "lot": 1000.0, "k_actions": 2}
        else:
            raise ConfigError(f"unknown agent kind {self.kind!r}")
        unknown = set(self.params) - set(base)
        if unknown:
            raise ConfigError(f"unknown {self.kind} parameters: "
                              f"{sorted(unknown)}")
        base.update(self.params)
        return base


@dataclass
class ScheduleSpec:
    t_in: int = 300_000          # training steps (q/dqn)
    e_in: int = 300              # training episodes (ppo)
    t_out: int = 5_000           # out-of-sample path length
    eval_every: int = 30_000     # steps (q/dqn) or episodes (ppo)
    num_agents: int = 20
    num_oos_tests: int = 10


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    outdir: str = "runs/experiment"
    market: MarketSpec = field(default_factory=MarketSpec)
    env: EnvSpec = field(default_factory=EnvSpec)
    benchmark: BenchmarkSpec = field(default_factory=BenchmarkSpec)
    agent: AgentSpec = field(default_factory=AgentSpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    persist: str = "final"

    def __post_init__(self):
        if self.persist not in PERSIST_CHOICES:
            raise ConfigError(f"persist must be one of {PERSIST_CHOICES}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["agent"]["params"] = self.agent.materialize()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        try:
            return cls(name=d.get("name", "experiment"),
                       seed=int(d.get("seed", 0)),
                       outdir=d.get("outdir", "runs/experiment"),
                       market=MarketSpec(**d.get("market", {})),
                       env=EnvSpec(**d.get("env", {})),
                       benchmark=BenchmarkSpec(**d.get("benchmark", {})),
                       agent=AgentSpec(**d.get("agent", {})),
                       schedule=ScheduleSpec(**d.get("schedule", {})),
                       persist=d.get("persist", "final"))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, s: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(s))

    def config_hash(self) -> str:
        """Hash of every semantic field (the artifact location is not
        part of the experiment identity)."""
        d = self.to_dict()
        d.pop("outdir")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def recipe(market_name: str, agent_kind: str = "dqn",
           seed: int = 0, outdir: Optional[str] = None) -> ExperimentConfig:
    """Named experiment presets covering the study's market variants."""
    markets = {
        "gaussian_1f": MarketSpec(),
        "gaussian_2f": MarketSpec(loadings=[0.00535, 0.005775],
                                  half_lives=[170.0, 350.0],
                                  factor_vols=[0.2, 0.1]),
        "student_t_nu6": MarketSpec(noise="student_t", nu=6),
        "student_t_nu8": MarketSpec(noise="student_t", nu=8),
        "garch_gaussian": MarketSpec(kind="garch"),
        "garch_t": MarketSpec(kind="garch", noise="student_t", nu=8),
    }
    if market_name not in markets:
        raise ConfigError(f"unknown recipe {market_name!r}; choose from "
                          f"{sorted(markets)}")
    sched = ScheduleSpec()
    if agent_kind == "ppo":
        sched = ScheduleSpec(t_out=2000, eval_every=30)
    return ExperimentConfig(
        name=f"{market_name}_{agent_kind}", seed=seed,
        outdir=outdir or f"runs/{market_name}_{agent_kind}",
        market=markets[market_name],
        agent=AgentSpec(kind=agent_kind),
        schedule=sched)


# --------------------------------------------------------------------------
# run machinery
# --------------------------------------------------------------------------

def derive_seed(*keys) -> int:
    """Deterministic sub-seed from integer keys."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


@dataclass
class BenchmarkKit:
    """Fitted benchmark pieces shared by every agent in a run."""

    sol: GpSolution
    model: EstimatedModel
    action_range: ActionRange
    sigma_sq: float

    def policy(self, informed: str, path: MarketPath):
        if informed == "fully" and path.factors is not None:
            return gp_policy(self.sol, self.model, path)
        return partially_informed_policy(self.sol, self.model)


def prepare_benchmark(cfg: ExperimentConfig) -> BenchmarkKit:
    """Fit the benchmark on a warm-up path and size the action range from
    its trade distribution."""
    market = cfg.market.params()
    warmup = simulate(market, cfg.benchmark.fit_window + 1, cfg.seed)
    if cfg.benchmark.informed == "fully" and warmup.factors is not None:
        model = fit_fully_informed(warmup.factors, warmup.returns)
    else:
        # GARCH markets have no observable factors: the informed
        # benchmark is the AR fit at the true lag, the partial one
        # searches the candidate lags.
        lags = ([1] if cfg.benchmark.informed == "fully"
                else cfg.benchmark.candidate_lags)
        model = fit_partially_informed(warmup.returns, lags)
    sol = solve_trading_rate(cfg.env.gamma, cfg.env.lam, cfg.env.r_f).bind(model)
    sigma_sq = market.noise_var()

    actions: list = []
    kit = BenchmarkKit(sol=sol, model=model, action_range=None,
                       sigma_sq=sigma_sq)
    if cfg.benchmark.informed == "fully" and warmup.factors is not None:
        pol = gp_policy(sol, model, warmup, record=actions)
    else:
        pol = partially_informed_policy(sol, model, record=actions)
    run_policy(cfg.env.config(sigma_sq), warmup, pol)
    kit.action_range = calibrate_action_range(actions)
    return kit


def _checkpoints(total: int, every: int) -> List[int]:
    cps = list(range(every, total + 1, every)) if every > 0 else []
    if not cps or cps[-1] != total:
        cps.append(total)
    return cps


def _eval_path_seed(cfg: ExperimentConfig, checkpoint: int, test: int) -> int:
    return cfg.seed + checkpoint + test


def evaluate_policy(cfg: ExperimentConfig, kit: BenchmarkKit, policy,
                    checkpoint: int, test: int, agent_id: str,
                    observe: str = OBSERVE_RETURN) -> PerfSeries:
    """One out-of-sample run on the shared (checkpoint, test) path."""
    market = cfg.market.params()
    path = simulate(market, cfg.schedule.t_out + 1,
                    _eval_path_seed(cfg, checkpoint, test))
    env_cfg = cfg.env.config(kit.sigma_sq)
    obs = observation_series(path, observe)
    return run_policy(env_cfg, path, policy, agent_id=agent_id,
                      checkpoint=checkpoint, obs=obs)


def evaluate_benchmark(cfg: ExperimentConfig, kit: BenchmarkKit,
                       checkpoint: int, test: int) -> PerfSeries:
    market = cfg.market.params()
    path = simulate(market, cfg.schedule.t_out + 1,
                    _eval_path_seed(cfg, checkpoint, test))
    pol = kit.policy(cfg.benchmark.informed, path)
    return run_policy(cfg.env.config(kit.sigma_sq), path, pol,
                      agent_id="benchmark", checkpoint=checkpoint)


@dataclass
class SummaryRow:
    agent: int
    checkpoint: int
    test: int
    agent_cum: float
    bench_cum: float
    agent_sr: float
    bench_sr: float

    @property
    def ratio(self) -> Optional[float]:
        return self.agent_cum / self.bench_cum if self.bench_cum > 0 else None

    @property
    def difference(self) -> float:
        return self.agent_cum - self.bench_cum


@dataclass
class RunArtifacts:
    outdir: str
    config_hash: str
    rows: List[SummaryRow]
    failures: dict
    action_range: ActionRange
    checkpoints: List[int]


def _write_summary_csv(path: Path, rows: Sequence[SummaryRow]) -> None:
    with open(path, "w") as fh:
        fh.write("agent,checkpoint,test,agent_cum,bench_cum,agent_sr,"
                 "bench_sr,ratio,difference\n")
        for r in rows:
            ratio = "" if r.ratio is None else repr(r.ratio)
            fh.write(f"{r.agent},{r.checkpoint},{r.test},{r.agent_cum!r},"
                     f"{r.bench_cum!r},{r.agent_sr!r},{r.bench_sr!r},"
                     f"{ratio},{r.difference!r}\n")


def _write_aggregate_csv(path: Path, rows: Sequence[SummaryRow],
                         checkpoints: Sequence[int]) -> None:
    """Per-checkpoint dots (each agent averaged over its tests) and the
    across-agent mean/std."""
    with open(path, "w") as fh:
        fh.write("checkpoint,bench_cum,bench_sr,agent_cum_mean,"
                 "agent_cum_std,agent_sr_mean,agent_sr_std\n")
        for cp in checkpoints:
            sel = [r for r in rows if r.checkpoint == cp]
            if not sel:
                continue
            agents = sorted(set(r.agent for r in sel))
            dots_cum = np.array([np.mean([r.agent_cum for r in sel
                                          if r.agent == a]) for a in agents])
            dots_sr = np.array([np.mean([r.agent_sr for r in sel
                                         if r.agent == a]) for a in agents])
            bench_cum = float(np.mean([r.bench_cum for r in sel]))
            bench_sr = float(np.mean([r.bench_sr for r in sel]))
            fh.write(f"{cp},{bench_cum!r},{bench_sr!r},"
                     f"{float(dots_cum.mean())!r},{float(dots_cum.std())!r},"
                     f"{float(dots_sr.mean())!r},{float(dots_sr.std())!r}\n")


def _persist_perf(cfg: ExperimentConfig, outdir: Path, sub: str,
                  perf: PerfSeries, checkpoint: int, test: int,
                  final_checkpoint: int) -> None:
    if cfg.persist == "none":
        return
    if cfg.persist == "final" and checkpoint != final_checkpoint:
        return
    d = outdir / sub
    d.mkdir(parents=True, exist_ok=True)
    perf.to_csv(d / f"perf_cp{checkpoint}_test{test}.csv")


def _train_one_agent(cfg: ExperimentConfig, kit: BenchmarkKit, index: int,
                     outdir: Path, bench_cache: dict) -> List[SummaryRow]:
    """Train agent ``index`` and evaluate it at every checkpoint."""
    sched = cfg.schedule
    hyper = cfg.agent.materialize()
    agent_dir = outdir / f"agent_{index}"
    agent_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(derive_seed(cfg.seed, 101, index))
    rows: List[SummaryRow] = []
    log_rows: list = []
    final_cp_for_persist = None

    def evaluate(policy, checkpoint):
        for test in range(sched.num_oos_tests):
            key = (checkpoint, test)
            if key not in bench_cache:
                bench_cache[key] = evaluate_benchmark(cfg, kit, checkpoint,
                                                      test)
            bench = bench_cache[key]
            perf = evaluate_policy(cfg, kit, policy, checkpoint, test,
                                   agent_id=f"agent_{index}",
                                   observe=cfg.env.observe)
            rows.append(SummaryRow(
                agent=index, checkpoint=checkpoint, test=test,
                agent_cum=perf.cum_net_pnl(), bench_cum=bench.cum_net_pnl(),
                agent_sr=_safe_sharpe(perf), bench_sr=_safe_sharpe(bench)))
            _persist_perf(cfg, outdir, f"agent_{index}", perf, checkpoint,
                          test, final_cp_for_persist)

    kind = cfg.agent.kind
    if kind in ("q", "dqn"):
        cps = _checkpoints(sched.t_in, sched.eval_every)
        final_cp_for_persist = cps[-1]
        train_path = simulate(cfg.market.params(), max(sched.t_in + 1, 2),
                              derive_seed(cfg.seed, 7, index))
        obs = observation_series(train_path, cfg.env.observe)
        if kind == "dqn":
            env_cfg = cfg.env.config(kit.sigma_sq,
                                     action_range=kit.action_range)
            dqn_cfg = agent_dqn.DqnConfig(**{**hyper,
                                             "hidden": tuple(hyper["hidden"])})
            agent = agent_dqn.DqnAgent(dqn_cfg,
                                       agent_dqn.action_grid(kit.action_range,
                                                             dqn_cfg.n_actions),
                                       train_steps=sched.t_in,
                                       seed=derive_seed(cfg.seed, 11, index))
            buffer = agent_dqn.ReplayBuffer(max(sched.t_in, 1))
            h = 0.0
            done = 0
            for cp in cps:
                if cp > done:
                    h = agent_dqn.train_on_path(
                        agent, buffer, env_cfg, train_path, rng, h_start=h,
                        n_steps=cp - done, t_start=done, log_rows=log_rows,
                        obs=obs)
                    done = cp
                agent.save(agent_dir / f"checkpoint_{cp}.npz")
                evaluate(agent_dqn.greedy_policy(agent), cp)
            _write_log(agent_dir / "train_log.csv",
                       "step,loss,epsilon,lr", log_rows)
        else:
            # the grid itself is the action constraint for the tabular agent
            env_cfg = cfg.env.config(kit.sigma_sq)
            grids = agent_q.DiscreteGrids.default(
                kit.action_range, ret_bound=hyper["ret_bound"],
                bp=hyper["bp"], max_holding=hyper["max_holding"],
                lot=hyper["lot"], k_actions=hyper["k_actions"])
            table = agent_q.QTable(
                grids=grids, alpha=hyper["alpha"], rho=hyper["rho"],
                visit_decay=hyper["visit_decay"],
                epsilon=LinearSchedule(
                    hyper["eps_start"], hyper["eps_end"],
                    max(1, int(hyper["eps_fraction"] * sched.t_in))))
            h = 0.0
            done = 0
            for cp in cps:
                if cp > done:
                    seg = agent_q.train_on_path(
                        table, env_cfg, train_path, rng, start_h=h,
                        t_start=done, n_steps=cp - done, obs=obs)
                    h = seg["final_h"]
                    log_rows.append((cp, seg["mean_reward"],
                                     table.epsilon.value(cp),
                                     seg["fraction_unvisited"]))
                    done = cp
                table.save(str(agent_dir / f"checkpoint_{cp}"))
                evaluate(agent_q.greedy_policy(table), cp)
            _write_log(agent_dir / "train_log.csv",
                       "step,mean_reward,epsilon,fraction_unvisited",
                       log_rows)
    elif kind == "ppo":
        cps = _checkpoints(sched.e_in, sched.eval_every)
        final_cp_for_persist = cps[-1]
        ppo_cfg = agent_ppo.PpoConfig(**{**hyper,
                                         "hidden": tuple(hyper["hidden"])})
        action_max = max(abs(kit.action_range.lo), abs(kit.action_range.hi))
        agent = agent_ppo.PpoAgent(ppo_cfg, action_max,
                                   seed=derive_seed(cfg.seed, 11, index))
        env_ep = cfg.env.config(kit.sigma_sq,
                                action_range=ActionRange(-action_max,
                                                         action_max))
        done = 0
        for cp in cps:
            if cp > done:
                agent_ppo.collect_and_train(
                    agent, env_ep, cfg.market.params(), cp - done,
                    seed=derive_seed(cfg.seed, 13, index), log_rows=log_rows,
                    observe=cfg.env.observe)
                done = cp
            agent.save(agent_dir / f"checkpoint_{cp}.npz")
            evaluate(agent_ppo.deterministic_policy(agent), cp)
        _write_log(agent_dir / "train_log.csv",
                   "episode,mean_reward,policy_loss,value_loss,entropy,"
                   "log_std", log_rows)
    else:
        raise ConfigError(f"unknown agent kind {kind!r}")
    return rows


def _safe_sharpe(perf: PerfSeries) -> float:
    """Sharpe with inactive (zero-variance) runs reported as 0."""
    try:
        return sharpe(perf.net_pnl)
    except ValueError:
        return 0.0


def _write_log(path: Path, header: str, rows: list) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, float)
                              else str(v) for v in row) + "\n")


def run_experiment(cfg: ExperimentConfig,
                   workers: Optional[int] = None) -> RunArtifacts:
    """Execute a full experiment; one faulty agent does not sink the rest."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.json").write_text(cfg.to_json())

    kit = prepare_benchmark(cfg)
    sched = cfg.schedule
    if cfg.agent.kind == "ppo":
        checkpoints = _checkpoints(sched.e_in, sched.eval_every)
    else:
        checkpoints = _checkpoints(sched.t_in, sched.eval_every)

    if workers is None:
        workers = int(os.environ.get("TRADELAB_WORKERS", "1"))

    rows: List[SummaryRow] = []
    failures: dict = {}
    bench_cache: dict = {}
    indices = list(range(sched.num_agents))
    if workers > 1 and len(indices) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(_train_agent_job, cfg.to_dict(), i): i
                    for i in indices}
            for fut, i in futs.items():
                try:
                    rows.extend(SummaryRow(**r) for r in fut.result())
                except Exception as exc:  # crash isolation
                    failures[i] = repr(exc)
    else:
        for i in indices:
            try:
                rows.extend(_train_one_agent(cfg, kit, i, outdir, bench_cache))
            except Exception as exc:  # crash isolation
                failures[i] = "".join(traceback.format_exception_only(exc))\
                    .strip()
    rows.sort(key=lambda r: (r.agent, r.checkpoint, r.test))

    _write_summary_csv(outdir / "summary.csv", rows)
    _write_aggregate_csv(outdir / "aggregate.csv", rows, checkpoints)
    if cfg.persist != "none":
        bench_dir = outdir / "bench"
        bench_dir.mkdir(exist_ok=True)
        persisted = (checkpoints if cfg.persist == "full"
                     else checkpoints[-1:])
        for cp in persisted:
            for test in range(sched.num_oos_tests):
                if (cp, test) not in bench_cache:
                    bench_cache[(cp, test)] = evaluate_benchmark(
                        cfg, kit, cp, test)
                bench_cache[(cp, test)].to_csv(
                    bench_dir / f"perf_cp{cp}_test{test}.csv")
    meta = {"config_hash": cfg.config_hash(), "seed": cfg.seed,
            "action_range": [kit.action_range.lo, kit.action_range.hi],
            "trading_rate": kit.sol.trading_rate,
            "model": json.loads(kit.model.to_json()),
            "sigma_sq": kit.sigma_sq,
            "checkpoints": checkpoints,
            "failures": failures}
    (outdir / "meta.json").write_text(json.dumps(meta, indent=1,
                                                 sort_keys=True))
    return RunArtifacts(outdir=str(outdir), config_hash=cfg.config_hash(),
                        rows=rows, failures=failures,
                        action_range=kit.action_range,
                        checkpoints=checkpoints)


def _train_agent_job(cfg_dict: dict, index: int) -> list:
    """Worker-pool entry: rebuild the config, train one agent, return
    plain dict rows (picklable)."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    kit = prepare_benchmark(cfg)
    rows = _train_one_agent(cfg, kit, index, Path(cfg.outdir), {})
    return [asdict(r) for r in rows]


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

def set_config_value(d: dict, axis: str, value):
    """Set a dotted path (lists addressed by integer components)."""
    parts = axis.split(".")
    node = d
    for p in parts[:-1]:
        if isinstance(node, list):
            node = node[int(p)]
        elif p in node:
            node = node[p]
        else:
            raise ConfigError(f"unknown config path {axis!r}")
    last = parts[-1]
    if isinstance(node, list):
        i = int(last)
        if not 0 <= i < len(node):
            raise ConfigError(f"index out of range in {axis!r}")
        node[i] = value
    else:
        if last not in node:
            raise ConfigError(f"unknown config path {axis!r}")
        node[last] = type(node[last])(value) if node[last] is not None \
            else value


def run_sweep(base: ExperimentConfig, axis: str, values: Sequence,
              outdir: Optional[str] = None) -> List[dict]:
    """One run per axis value; returns (and writes) the SR-vs-benchmark
    table with across-agent mean and std at the final checkpoint."""
    outdir = Path(outdir or base.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    table = []
    for value in values:
        d = base.to_dict()
        set_config_value(d, axis, value)
        d["outdir"] = str(outdir / f"{axis.replace('.', '_')}_{value}")
        cfg = ExperimentConfig.from_dict(d)
        art = run_experiment(cfg)
        final = art.checkpoints[-1]
        sel = [r for r in art.rows if r.checkpoint == final]
        agents = sorted(set(r.agent for r in sel))
        dots = np.array([np.mean([r.agent_sr for r in sel if r.agent == a])
                         for a in agents])
        bench_sr = float(np.mean([r.bench_sr for r in sel])) if sel else float("nan")
        table.append({"axis": axis, "value": value,
                      "bench_sr": bench_sr,
                      "agent_sr_mean": float(dots.mean()) if len(dots) else float("nan"),
                      "agent_sr_std": float(dots.std()) if len(dots) else float("nan"),
                      "outdir": d["outdir"]})
    with open(outdir / "sweep.csv", "w") as fh:
        fh.write("axis,value,bench_sr,agent_sr_mean,agent_sr_std\n")
        for row in table:
            fh.write(f"{row['axis']},{row['value']},{row['bench_sr']!r},"
                     f"{row['agent_sr_mean']!r},{row['agent_sr_std']!r}\n")
    return table
