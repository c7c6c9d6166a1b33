"""Closed-form dynamic trading benchmark and its estimated variants.

The optimal strategy trades a fixed fraction of the gap to an aim
portfolio each step:

    h_t = (1 - a/lam) h_{t-1} + (a/lam) h_aim(f_t)

where the trading-rate root ``a`` solves a quadratic in (gamma, lam,
r_f) and the aim portfolio is a Markowitz portfolio with each factor
scaled down by its mean-reversion speed.  This module also provides the
two estimation procedures (fully informed from observed factors,
partially informed from lagged returns) and the quantile heuristic that
sizes the RL action space from the benchmark's own trades.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, asdict
from typing import Iterable, Optional, Sequence

import numpy as np

from .sim import MarketPath


class EstimationError(ValueError):
    """Model estimation failed (degenerate regressor or empty input)."""


PHI_CLAMP = (1e-6, 1.0 - 1e-6)


@dataclass
class GpSolution:
    """Trading-rate root and the scalars it was solved from."""

    a: float
    gamma: float
    lam: float
    r_f: float = 0.0
    aim_scalings: Optional[np.ndarray] = None  # 1/(1 + phi_k a/gamma), set on bind

    @property
    def trading_rate(self) -> float:
        return self.a / self.lam

    def bind(self, model: "EstimatedModel") -> "GpSolution":
        """Fill aim_scalings from the model's mean-reversion speeds."""
        self.aim_scalings = 1.0 / (1.0 + np.asarray(model.phi_hat) * self.a / self.gamma)
        return self

    def to_json(self) -> str:
        d = asdict(self)
        if self.aim_scalings is not None:
            d["aim_scalings"] = list(self.aim_scalings)
        return json.dumps(d)


@dataclass
class EstimatedModel:
    """Per-factor loadings/speeds plus residual vol, as estimated from data."""

    b_hat: np.ndarray            # length K
    phi_hat: np.ndarray          # length K, clamped into (0,1)
    sigma_hat: float             # residual std of the return regression
    chosen_lags: list = field(default_factory=list)  # partially informed only
    fit_window: int = 0

    def __post_init__(self):
        self.b_hat = np.atleast_1d(np.asarray(self.b_hat, dtype=float))
        self.phi_hat = np.clip(np.atleast_1d(np.asarray(self.phi_hat, dtype=float)),
                               *PHI_CLAMP)
        if self.sigma_hat <= 0:
            raise EstimationError("sigma_hat must be positive")

    @property
    def num_factors(self) -> int:
        return len(self.b_hat)

    def to_json(self) -> str:
        return json.dumps({"b_hat": list(self.b_hat),
                           "phi_hat": list(self.phi_hat),
                           "sigma_hat": self.sigma_hat,
                           "chosen_lags": list(self.chosen_lags),
                           "fit_window": self.fit_window})

    @classmethod
    def from_json(cls, s: str) -> "EstimatedModel":
        d = json.loads(s)
        return cls(b_hat=np.array(d["b_hat"]), phi_hat=np.array(d["phi_hat"]),
                   sigma_hat=d["sigma_hat"], chosen_lags=list(d["chosen_lags"]),
                   fit_window=int(d["fit_window"]))


@dataclass(frozen=True)
class ActionRange:
    """Traded-shares interval containing 0 for the RL action space."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < 0.0 < self.hi):
            raise ValueError(f"action range must straddle 0, got "
                             f"[{self.lo}, {self.hi}]")


def solve_trading_rate(gamma: float, lam: float, r_f: float = 0.0) -> GpSolution:
    """Positive root of the trading-rate quadratic.

    a = [-(gamma(1-r_f) + lam r_f) + sqrt((gamma(1-r_f) + lam r_f)^2
         + 4 gamma lam (1-r_f)^2)] / (2 (1-r_f))
    """
    if gamma <= 0 or lam <= 0:
        raise ValueError("gamma and lam must be positive")
    if not 0.0 <= r_f < 1.0:
        raise ValueError("need 0 <= r_f < 1")
    b = gamma * (1.0 - r_f) + lam * r_f
    a = (-b + math.sqrt(b * b + 4.0 * gamma * lam * (1.0 - r_f) ** 2)) \
        / (2.0 * (1.0 - r_f))
    return GpSolution(a=a, gamma=gamma, lam=lam, r_f=r_f)


def trading_rate_residual(sol: GpSolution) -> float:
    """Relative residual of a in its defining quadratic
    (1-r_f) a^2 + (gamma(1-r_f) + lam r_f) a - gamma lam (1-r_f) = 0."""
    b = sol.gamma * (1.0 - sol.r_f) + sol.lam * sol.r_f
    resid = ((1.0 - sol.r_f) * sol.a ** 2 + b * sol.a
             - sol.gamma * sol.lam * (1.0 - sol.r_f))
    return abs(resid) / (sol.gamma * sol.lam * (1.0 - sol.r_f))


def aim_portfolio(sol: GpSolution, model: EstimatedModel,
                  f: Sequence[float]) -> float:
    """Target holding: Markowitz scaled down per-factor by mean reversion,
    sum_k b_k f_k / (1 + phi_k a/gamma) / (gamma sigma^2)."""
    if model.sigma_hat <= 0:
        raise ValueError("aim portfolio needs sigma_hat > 0")
    f = np.atleast_1d(np.asarray(f, dtype=float))
    scal = 1.0 / (1.0 + model.phi_hat * sol.a / sol.gamma)
    return float((model.b_hat * scal) @ f / (sol.gamma * model.sigma_hat ** 2))


def markowitz_portfolio(model: EstimatedModel, f: Sequence[float],
                        gamma: float) -> float:
    """Single-period mean-variance optimum b . f / (gamma sigma^2),
    the zero-cost limit of the aim portfolio."""
    f = np.atleast_1d(np.asarray(f, dtype=float))
    return float(model.b_hat @ f / (gamma * model.sigma_hat ** 2))


def gp_action(sol: GpSolution, model: EstimatedModel, f: Sequence[float],
              h_prev: float) -> float:
    """Trade of the optimal strategy: (a/lam) * (aim - h_prev)."""
    return sol.trading_rate * (aim_portfolio(sol, model, f) - h_prev)


def _ols_slope(x: np.ndarray, y: np.ndarray) -> float:
    """No-intercept least squares slope of y on x."""
    sxx = float(x @ x)
    if sxx <= 0.0 or not np.isfinite(sxx):
        raise EstimationError("degenerate regressor (zero variance)")
    return float(x @ y) / sxx


def fit_fully_informed(factors: np.ndarray, returns: np.ndarray) -> EstimatedModel:
    """Estimate (b, phi, sigma) from observed factors and returns.

    phi_k comes from regressing the factor increment on the lagged
    factor level; b from the joint regression of next returns on current
    factors; sigma from the residual std of that return regression.
    """
    factors = np.atleast_2d(np.asarray(factors, dtype=float))
    if factors.shape[0] == 1 and factors.shape[1] > 2:
        factors = factors.T
    returns = np.asarray(returns, dtype=float)
    t = len(returns)
    if factors.shape[0] != t:
        raise EstimationError("factors and returns must have equal length")
    if t < 50:
        raise EstimationError(f"need at least 50 observations, got {t}")

    x = factors[:-1]          # f_t
    y = returns[1:]           # y_{t+1}
    k = factors.shape[1]

    phi_hat = np.empty(k)
    for j in range(k):
        df = factors[1:, j] - factors[:-1, j]
        phi_hat[j] = -_ols_slope(x[:, j], df)

    xtx = x.T @ x
    if np.linalg.matrix_rank(xtx) < k or np.linalg.cond(xtx) > 1e12:
        raise EstimationError("degenerate regressor (zero variance)")
    b_hat = np.linalg.solve(xtx, x.T @ y)
    resid = y - x @ b_hat
    sigma_hat = float(np.sqrt(np.mean(resid ** 2)))
    if sigma_hat <= 0:
        raise EstimationError("zero residual variance; sigma_hat undefined")
    return EstimatedModel(b_hat=b_hat, phi_hat=phi_hat, sigma_hat=sigma_hat,
                          fit_window=t)


def fit_partially_informed(returns: np.ndarray,
                           candidate_lags: Iterable[int]) -> EstimatedModel:
    """Pick the lagged return that best predicts the next return.

    For each lag L, regress y_{t+1} on y_{t-L+1} and keep the lag with
    the smallest mean squared residual (near-exact ties break toward the
    smallest lag).  The winning lagged return becomes the single factor;
    its own AR(1) fit supplies phi.
    """
    returns = np.asarray(returns, dtype=float)
    lags = sorted(set(int(L) for L in candidate_lags))
    if not lags:
        raise EstimationError("candidate lag set is empty")
    if any(L < 1 for L in lags):
        raise EstimationError("lags must be >= 1")
    t = len(returns)
    if max(lags) >= t / 10:
        raise EstimationError("max lag must be below a tenth of the sample")

    best = None
    for lag in lags:
        # predictor y_{t-L+1}, target y_{t+1}: offset of L steps
        x = returns[: t - lag]
        y = returns[lag:]
        slope = _ols_slope(x, y)
        mse = float(np.mean((y - slope * x) ** 2))
        if best is None or mse < best[0] * (1.0 - 1e-12):
            best = (mse, lag, slope, x, y)

    mse, lag, slope, x, y = best
    resid_std = math.sqrt(mse)
    if resid_std <= 0:
        resid_std = 1e-12  # perfectly deterministic series
    # the factor is a shifted copy of the return series, so its one-step
    # mean-reversion speed is the AR(1) speed of the returns themselves
    phi = -_ols_slope(returns[:-1], returns[1:] - returns[:-1])
    return EstimatedModel(b_hat=np.array([slope]), phi_hat=np.array([phi]),
                          sigma_hat=resid_std, chosen_lags=[lag],
                          fit_window=t)


def calibrate_action_range(benchmark_actions: Sequence[float],
                           q_lo: float = 0.001,
                           q_hi: float = 0.999) -> ActionRange:
    """Empirical (q_lo, q_hi) quantiles of a benchmark warm-up action
    distribution, symmetrized if one side fails to straddle zero."""
    a = np.asarray(benchmark_actions, dtype=float)
    if a.size == 0:
        raise ValueError("no benchmark actions recorded")
    if a.size < 1000:
        raise ValueError(f"need at least 1000 warm-up actions, got {a.size}")
    lo, hi = np.quantile(a, [q_lo, q_hi])  # linear interpolation
    if lo >= 0.0 or hi <= 0.0:
        m = max(abs(lo), abs(hi))
        if m == 0.0:
            raise ValueError("degenerate action distribution (all zero)")
        lo, hi = -m, m
    return ActionRange(lo=float(lo), hi=float(hi))


def gp_policy(sol: GpSolution, model: EstimatedModel, path: MarketPath,
              record: Optional[list] = None):
    """Fully informed benchmark policy over a factor path.

    The closure reads the true factor row for each successive call, so
    it must be driven exactly once per step from t = 0.
    """
    if path.factors is None:
        raise ValueError("fully informed policy needs a factor path")
    factors = path.factors
    counter = {"t": 0}

    def policy(state) -> float:
        f = factors[counter["t"]]
        counter["t"] += 1
        dh = gp_action(sol, model, f, state.h_prev)
        if record is not None:
            record.append(dh)
        return dh

    return policy


def partially_informed_policy(sol: GpSolution, model: EstimatedModel,
                              record: Optional[list] = None):
    """Benchmark policy whose factor is the chosen lagged return.

    Reconstructs y_{t-L+1} from the stream of observed states, padding
    with zeros before enough history exists.
    """
    lag = model.chosen_lags[0] if model.chosen_lags else 1
    hist = deque([0.0] * lag, maxlen=lag)

    def policy(state) -> float:
        hist.append(state.y)
        f = [hist[0]]  # y_{t-L+1}
        dh = gp_action(sol, model, f, state.h_prev)
        if record is not None:
            record.append(dh)
        return dh

    return policy


def markowitz_policy(model: EstimatedModel, gamma: float, path: MarketPath):
    """Cost-blind single-period portfolio rebalanced to b.f/(gamma sigma^2)."""
    if path.factors is None:
        raise ValueError("markowitz policy needs a factor path")
    factors = path.factors
    counter = {"t": 0}

    def policy(state) -> float:
        f = factors[counter["t"]]
        counter["t"] += 1
        return markowitz_portfolio(model, f, gamma) - state.h_prev

    return policy
