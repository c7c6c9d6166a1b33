"""Synthetic market generators.

Two data-generating processes:

* mean-reverting factor dynamics with a linear return loading
  (``simulate_factor_path``), and
* an AR(1) conditional mean with GARCH(1,1) volatility
  (``simulate_garch_path``).

Noise is Gaussian or standardized Student-T.  Generation is a pure
function of (params, horizon, seed), so paths are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.signal import lfilter

GAUSSIAN = "gaussian"
STUDENT_T = "student_t"

# phi conventions for half_life_to_phi
HALVING = "halving"      # (1 - phi)^h = 1/2
LOG_RATIO = "log_ratio"  # log(2) / log(h), kept for replication attempts


class GenerationError(RuntimeError):
    """A simulated path produced a non-finite value."""


def half_life_to_phi(half_life: float, formula: str = HALVING) -> float:
    """Mean-reversion speed for a signal that halves in ``half_life`` steps.

    With the default convention the deterministic map f -> (1 - phi) f
    satisfies (1 - phi)^h = 1/2, i.e. phi = 1 - 2**(-1/h).  The
    ``log_ratio`` variant computes log(2)/log(h) instead; it does not
    halve the signal in h steps and exists only so that runs can be set
    up with that alternative convention.
    """
    if half_life <= 0:
        raise ValueError(f"half_life must be positive, got {half_life}")
    if formula == HALVING:
        return 1.0 - 2.0 ** (-1.0 / half_life)
    if formula == LOG_RATIO:
        if half_life <= 1.0:
            raise ValueError("log_ratio convention needs half_life > 1")
        phi = math.log(2.0) / math.log(half_life)
        if not 0.0 < phi < 1.0:
            raise ValueError(f"log_ratio gives phi={phi} outside (0,1)")
        return phi
    raise ValueError(f"unknown phi formula {formula!r}")


def _standardized_noise(rng: np.random.Generator, noise: str,
                        nu: Optional[int], size) -> np.ndarray:
    """Unit-variance draws: standard normal, or Student-T rescaled by
    sqrt(nu/(nu-2)) so Gaussian and T runs share a variance scale."""
    if noise == GAUSSIAN:
        return rng.standard_normal(size)
    if noise == STUDENT_T:
        return rng.standard_t(nu, size) / math.sqrt(nu / (nu - 2.0))
    raise ValueError(f"unknown noise kind {noise!r}")


def _check_noise(noise: str, nu: Optional[int]) -> None:
    if noise not in (GAUSSIAN, STUDENT_T):
        raise ValueError(f"unknown noise kind {noise!r}")
    if noise == STUDENT_T:
        if nu is None or nu <= 2:
            raise ValueError("student_t noise needs integer nu > 2 "
                             "(finite variance)")


@dataclass(frozen=True)
class FactorModelParams:
    """Mean-reverting factor model: y_{t+1} = b . f_t + u_{t+1} with
    f_{t+1} = (1 - phi) * f_t + eps_{t+1}, all covariances diagonal."""

    loadings: tuple            # b, return units per factor unit, length K
    half_lives: tuple          # steps for half the signal to decay
    factor_vols: tuple         # per-step std of eps components
    asset_vol: float           # per-step std of u
    noise: str = GAUSSIAN
    nu: Optional[int] = None
    phi_formula: str = HALVING

    def __post_init__(self):
        object.__setattr__(self, "loadings", tuple(float(x) for x in self.loadings))
        object.__setattr__(self, "half_lives", tuple(float(x) for x in self.half_lives))
        object.__setattr__(self, "factor_vols", tuple(float(x) for x in self.factor_vols))
        k = len(self.loadings)
        if not 1 <= k <= 2:
            raise ValueError(f"supported factor counts are 1 or 2, got {k}")
        if len(self.half_lives) != k or len(self.factor_vols) != k:
            raise ValueError("loadings, half_lives and factor_vols must have "
                             "equal length")
        if any(h <= 0 for h in self.half_lives):
            raise ValueError("half_lives must be positive")
        if any(v < 0 for v in self.factor_vols):
            raise ValueError("factor_vols must be non-negative")
        if self.asset_vol < 0:
            raise ValueError("asset_vol must be non-negative")
        _check_noise(self.noise, self.nu)
        for phi in self.phis():
            if not 0.0 < phi < 1.0:
                raise ValueError(f"derived phi={phi} outside (0,1)")

    @property
    def num_factors(self) -> int:
        return len(self.loadings)

    def phis(self) -> np.ndarray:
        return np.array([half_life_to_phi(h, self.phi_formula)
                         for h in self.half_lives])

    def stationary_factor_var(self) -> np.ndarray:
        """Stationary AR(1) variance vol^2 / (1 - (1-phi)^2) per factor."""
        keep = 1.0 - self.phis()
        return np.asarray(self.factor_vols) ** 2 / (1.0 - keep ** 2)

    def noise_var(self) -> float:
        """Variance of the unpredictable return component."""
        return self.asset_vol ** 2


@dataclass(frozen=True)
class GarchParams:
    """AR(1) return with GARCH(1,1) variance:
    y_{t+1} = ar_coeff * y_t + u_{t+1}, u_t = sigma_t z_t,
    sigma^2_{t+1} = omega + alpha * u_t^2 + beta * sigma_t^2."""

    omega: float
    alpha: float
    beta: float
    ar_coeff: float
    noise: str = GAUSSIAN
    nu: Optional[int] = None

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.alpha + self.beta >= 1.0:
            raise ValueError("need alpha + beta < 1 for covariance "
                             "stationarity")
        if abs(self.ar_coeff) >= 1.0:
            raise ValueError("|ar_coeff| must be < 1")
        _check_noise(self.noise, self.nu)

    def unconditional_var(self) -> float:
        """omega / (1 - alpha - beta), the stationary variance of u."""
        return self.omega / (1.0 - self.alpha - self.beta)

    def noise_var(self) -> float:
        return self.unconditional_var()


MarketParams = Union[FactorModelParams, GarchParams]


@dataclass
class MarketPath:
    """One simulated series plus the metadata needed to regenerate it.

    ``returns[0]`` is 0 by convention (there is no prior signal);
    ``returns[t] = b . factors[t-1] + u_t`` for factor paths, so factor
    row t predicts return t+1.
    """

    returns: np.ndarray                  # length T
    params: Optional[MarketParams]       # None when reloaded from CSV
    seed: int
    factors: Optional[np.ndarray] = None  # T x K, factor paths only
    sigmas: Optional[np.ndarray] = None   # length T, GARCH paths only

    def __post_init__(self):
        if not np.all(np.isfinite(self.returns)):
            raise GenerationError("non-finite return in simulated path")

    @property
    def horizon(self) -> int:
        return len(self.returns)

    def to_csv(self, path) -> None:
        """Write `t,f1[,f2],y[,sigma]` rows."""
        cols = ["t"]
        arrays = [np.arange(self.horizon)]
        if self.factors is not None:
            for k in range(self.factors.shape[1]):
                cols.append(f"f{k + 1}")
                arrays.append(self.factors[:, k])
        cols.append("y")
        arrays.append(self.returns)
        if self.sigmas is not None:
            cols.append("sigma")
            arrays.append(self.sigmas)
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in zip(*arrays):
                fh.write(",".join(repr(float(v)) if isinstance(v, float)
                                  else str(v) for v in row) + "\n")


def load_path_csv(path) -> MarketPath:
    """Reload a ``MarketPath.to_csv`` file.  Params are not recoverable
    from the CSV, so ``params`` is None on the result."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = {name: np.array([float(r[i]) for r in rows])
            for i, name in enumerate(header)}
    factor_cols = [c for c in header if c.startswith("f") and c != "f"]
    factors = (np.column_stack([data[c] for c in factor_cols])
               if factor_cols else None)
    return MarketPath(returns=data["y"], params=None, seed=-1,
                      factors=factors, sigmas=data.get("sigma"))


def simulate_factor_path(params: FactorModelParams, horizon: int,
                         seed: int) -> MarketPath:
    """Simulate f_{t+1} = (1-phi) f_t + eps and y_{t+1} = b . f_t + u.

    f_0 = 0 and returns[0] = 0; each row of ``factors`` is
    contemporaneous with the same row of ``returns``.
    """
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    rng = np.random.default_rng(seed)
    k = params.num_factors
    keep = 1.0 - params.phis()
    vols = np.asarray(params.factor_vols)

    eps = _standardized_noise(rng, params.noise, params.nu, (horizon, k)) * vols
    u = _standardized_noise(rng, params.noise, params.nu, horizon) * params.asset_vol

    eps[0, :] = 0.0  # f_0 = 0
    factors = np.empty((horizon, k))
    for j in range(k):
        # f_t = keep * f_{t-1} + eps_t realized as an IIR filter
        factors[:, j] = lfilter([1.0], [1.0, -keep[j]], eps[:, j])

    returns = np.empty(horizon)
    returns[0] = 0.0
    returns[1:] = factors[:-1] @ np.asarray(params.loadings) + u[1:]

    if not (np.all(np.isfinite(factors)) and np.all(np.isfinite(returns))):
        raise GenerationError("non-finite draw during factor simulation")
    return MarketPath(returns=returns, params=params, seed=seed,
                      factors=factors)


def simulate_garch_path(params: GarchParams, horizon: int,
                        seed: int) -> MarketPath:
    """Simulate the AR(1)-GARCH(1,1) return series.

    sigma^2_0 starts at the unconditional variance and u_0 = sigma_0 z_0,
    so the variance chain is stationary from the first step.
    """
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    rng = np.random.default_rng(seed)
    z = _standardized_noise(rng, params.noise, params.nu, horizon)

    omega, alpha, beta = params.omega, params.alpha, params.beta
    ar = params.ar_coeff
    sig2 = params.unconditional_var()

    returns = np.empty(horizon)
    sigmas = np.empty(horizon)
    sigmas[0] = math.sqrt(sig2)
    u_prev = sigmas[0] * z[0]
    returns[0] = u_prev
    for t in range(1, horizon):
        sig2 = omega + alpha * u_prev * u_prev + beta * sig2
        sig = math.sqrt(sig2)
        u = sig * z[t]
        returns[t] = ar * returns[t - 1] + u
        sigmas[t] = sig
        u_prev = u

    if not np.all(np.isfinite(returns)):
        raise GenerationError("non-finite draw during GARCH simulation")
    return MarketPath(returns=returns, params=params, seed=seed,
                      sigmas=sigmas)


def simulate(params: MarketParams, horizon: int, seed: int) -> MarketPath:
    """Dispatch on the parameter type."""
    if isinstance(params, FactorModelParams):
        return simulate_factor_path(params, horizon, seed)
    if isinstance(params, GarchParams):
        return simulate_garch_path(params, horizon, seed)
    raise TypeError(f"unsupported params type {type(params).__name__}")


def garch_kurtosis(params: GarchParams) -> float:
    """Fourth standardized moment of the GARCH(1,1) return distribution,
    3 [1 - (a+b)^2] / [1 - (a+b)^2 - 2 a^2]; finite only when the
    denominator is positive."""
    s = (params.alpha + params.beta) ** 2
    denom = 1.0 - s - 2.0 * params.alpha ** 2
    if denom <= 0:
        raise ValueError(
            "fourth moment does not exist: need "
            "1 - 2*alpha^2 - (alpha+beta)^2 > 0, got "
            f"{denom:.6g}")
    return 3.0 * (1.0 - s) / denom
