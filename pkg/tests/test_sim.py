import math

import numpy as np
import pytest

from tradelab.sim import (FactorModelParams, GarchParams, garch_kurtosis,
                          half_life_to_phi, load_path_csv,
                          simulate_factor_path, simulate_garch_path)


def bisect_phi(half_life, lo=0.0, hi=1.0, iters=200):
    """Independent oracle: solve (1 - phi)^h = 1/2 by bisection."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (1.0 - mid) ** half_life > 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_half_life_one_step_halves():
    assert half_life_to_phi(1.0) == pytest.approx(0.5, abs=1e-15)


def test_half_life_350_matches_bisection_oracle():
    assert half_life_to_phi(350.0) == pytest.approx(bisect_phi(350.0),
                                                    abs=1e-12)
    assert half_life_to_phi(350.0) == pytest.approx(0.0019784, abs=1e-7)


def test_half_life_limit_no_mean_reversion():
    assert half_life_to_phi(1e9) < 1e-8


def test_half_life_rejects_nonpositive():
    with pytest.raises(ValueError):
        half_life_to_phi(0.0)
    with pytest.raises(ValueError):
        half_life_to_phi(-3.0)


def test_printed_log_ratio_variant():
    # the alternative convention gives a much faster speed at h=350
    assert half_life_to_phi(350.0, formula="log_ratio") == pytest.approx(
        math.log(2) / math.log(350), rel=1e-12)


def params_1f(**kw):
    base = dict(loadings=[0.00535], half_lives=[350.0], factor_vols=[0.2],
                asset_vol=0.01)
    base.update(kw)
    return FactorModelParams(**base)


def test_zero_noise_fixed_point():
    p = params_1f(factor_vols=[0.0], asset_vol=0.0)
    path = simulate_factor_path(p, 500, seed=1)
    assert np.all(path.factors == 0.0)
    assert np.all(path.returns == 0.0)


def test_factor_path_determinism():
    p = params_1f()
    a = simulate_factor_path(p, 4000, seed=42)
    b = simulate_factor_path(p, 4000, seed=42)
    assert np.array_equal(a.returns, b.returns)
    assert np.array_equal(a.factors, b.factors)
    c = simulate_factor_path(p, 4000, seed=43)
    assert not np.array_equal(a.returns, c.returns)


def test_stationary_return_variance():
    # Var[y] = b^2 Var[f] + sigma^2 with Var[f] = vol^2/(1-(1-phi)^2);
    # the long factor half-life leaves ~2.5% sampling noise even at 1e6
    # steps, so the check is seeded
    p = params_1f()
    path = simulate_factor_path(p, 1_000_000, seed=8)
    target = p.loadings[0] ** 2 * p.stationary_factor_var()[0] \
        + p.asset_vol ** 2
    assert np.var(path.returns[1:]) == pytest.approx(target, rel=0.02)


def test_factor_recursion_identity():
    # reconstruct eps from the recorded path, check f went through
    # f_{t+1} = (1-phi) f_t exactly
    p = params_1f(half_lives=[25.0])
    path = simulate_factor_path(p, 300, seed=9)
    keep = 1.0 - p.phis()[0]
    eps = path.factors[1:, 0] - keep * path.factors[:-1, 0]
    rebuilt = np.empty_like(path.factors[:, 0])
    rebuilt[0] = 0.0
    for t in range(1, len(rebuilt)):
        rebuilt[t] = keep * rebuilt[t - 1] + eps[t - 1]
    assert np.allclose(rebuilt, path.factors[:, 0], atol=1e-12)


def test_returns_align_with_lagged_factors():
    p = params_1f(asset_vol=0.0)
    path = simulate_factor_path(p, 200, seed=3)
    expect = path.factors[:-1] @ np.array(p.loadings)
    assert np.allclose(path.returns[1:], expect, atol=1e-15)
    assert path.returns[0] == 0.0


@pytest.mark.parametrize("nu", [6, 8, 10])
def test_student_t_scaling(nu):
    rng_path = simulate_factor_path(
        params_1f(noise="student_t", nu=nu, factor_vols=[0.0],
                  asset_vol=0.01),
        1_000_000, seed=nu)
    # with the factor silenced, returns are pure scaled T noise
    assert np.std(rng_path.returns[1:]) == pytest.approx(0.01, rel=0.02)


def test_two_factor_shapes():
    p = FactorModelParams(loadings=[0.00535, 0.005775],
                          half_lives=[170.0, 350.0],
                          factor_vols=[0.2, 0.1], asset_vol=0.01)
    path = simulate_factor_path(p, 1000, seed=5)
    assert path.factors.shape == (1000, 2)
    assert len(path.returns) == 1000


def test_param_validation():
    with pytest.raises(ValueError):
        params_1f(half_lives=[-1.0])
    with pytest.raises(ValueError):
        params_1f(noise="student_t", nu=2)
    with pytest.raises(ValueError):
        params_1f(noise="student_t")  # nu missing
    with pytest.raises(ValueError):
        FactorModelParams(loadings=[1, 2, 3], half_lives=[1, 1, 1],
                          factor_vols=[1, 1, 1], asset_vol=1)
    with pytest.raises(ValueError):
        simulate_factor_path(params_1f(), 1, seed=0)


def garch(**kw):
    base = dict(omega=0.01, alpha=0.05, beta=0.94, ar_coeff=0.9)
    base.update(kw)
    return GarchParams(**base)


def test_garch_stationarity_guard():
    with pytest.raises(ValueError):
        garch(alpha=0.1, beta=0.9)


def test_garch_variance_recursion_identity():
    # sigma^2_{t+1} = omega + alpha u_t^2 + beta sigma_t^2 on the recorded
    # path, with u_t recovered from the AR(1) mean equation
    p = garch()
    path = simulate_garch_path(p, 500, seed=2)
    u = np.empty(500)
    u[0] = path.returns[0]
    u[1:] = path.returns[1:] - p.ar_coeff * path.returns[:-1]
    sig2 = path.sigmas ** 2
    expect = p.omega + p.alpha * u[:-1] ** 2 + p.beta * sig2[:-1]
    assert np.allclose(sig2[1:], expect, rtol=1e-12)
    # hand value: u=0, sigma^2=1 -> 0.95
    assert p.omega + p.alpha * 0.0 + p.beta * 1.0 == pytest.approx(0.95)


def test_garch_degenerate_constant_variance():
    p = garch(alpha=0.0, beta=0.0)
    path = simulate_garch_path(p, 200, seed=1)
    assert np.allclose(path.sigmas, math.sqrt(p.omega), atol=1e-15)


def test_garch_unconditional_variance():
    p = garch()
    path = simulate_garch_path(p, 1_000_000, seed=77)
    u = np.empty(path.horizon)
    u[0] = path.returns[0]
    u[1:] = path.returns[1:] - p.ar_coeff * path.returns[:-1]
    assert np.var(u) == pytest.approx(p.unconditional_var(), rel=0.03)


def test_garch_excess_kurtosis_when_archy():
    p = garch()
    path = simulate_garch_path(p, 1_000_000, seed=13)
    u = path.returns[1:] - p.ar_coeff * path.returns[:-1]
    kurt = np.mean(u ** 4) / np.mean(u ** 2) ** 2
    assert kurt > 3.0


def test_kurtosis_formula_values():
    assert garch_kurtosis(garch(alpha=0.0, beta=0.5)) == pytest.approx(
        3.0, abs=1e-12)
    expected = 3.0 * (1 - 0.99 ** 2) / (1 - 0.99 ** 2 - 2 * 0.05 ** 2)
    assert garch_kurtosis(garch()) == pytest.approx(expected, abs=1e-9)
    assert garch_kurtosis(garch()) == pytest.approx(4.0067, abs=1e-4)


def test_kurtosis_positivity_boundary():
    assert np.isfinite(garch_kurtosis(garch(alpha=0.3, beta=0.6)))
    with pytest.raises(ValueError):
        garch_kurtosis(garch(alpha=0.32, beta=0.6))


def test_garch_determinism():
    a = simulate_garch_path(garch(), 3000, seed=4)
    b = simulate_garch_path(garch(), 3000, seed=4)
    assert np.array_equal(a.returns, b.returns)
    assert np.array_equal(a.sigmas, b.sigmas)


def test_path_csv_roundtrip(tmp_path):
    p = params_1f()
    path = simulate_factor_path(p, 50, seed=8)
    f = tmp_path / "path.csv"
    path.to_csv(f)
    back = load_path_csv(f)
    assert np.array_equal(back.returns, path.returns)
    assert np.array_equal(back.factors, path.factors)
    g = simulate_garch_path(garch(), 50, seed=8)
    f2 = tmp_path / "garch.csv"
    g.to_csv(f2)
    back2 = load_path_csv(f2)
    assert np.array_equal(back2.returns, g.returns)
    assert np.array_equal(back2.sigmas, g.sigmas)
