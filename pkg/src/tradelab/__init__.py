"""tradelab: a desk-scale lab for RL traders on simulated factor markets.

Simulates returns driven by known mean-reverting factors (plus fat-tail
and GARCH misspecifications), computes the closed-form optimal strategy
as a benchmark, and trains tabular Q, double-DQN and PPO agents against
it.
"""

from .benchmark import (ActionRange, EstimatedModel, GpSolution,
                        calibrate_action_range, fit_fully_informed,
                        fit_partially_informed, gp_action, aim_portfolio,
                        markowitz_portfolio, solve_trading_rate)
from .env import EnvConfig, State, StepOutcome, run_policy, step
from .evaluation import PerfSeries, Summary, aggregate, compare, sharpe
from .experiment import (ExperimentConfig, recipe, run_experiment, run_sweep)
from .sim import (FactorModelParams, GarchParams, MarketPath, garch_kurtosis,
                  half_life_to_phi, simulate, simulate_factor_path,
                  simulate_garch_path)

__version__ = "0.1.0"
