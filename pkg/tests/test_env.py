import numpy as np
import pytest

from tradelab.benchmark import (ActionRange, fit_fully_informed, gp_policy,
                                markowitz_policy, solve_trading_rate)
from tradelab.env import (EnvConfig, State, observation_series, run_policy,
                          step)
from tradelab.sim import FactorModelParams, simulate_factor_path

CFG = EnvConfig(gamma=0.01, lam=0.001, sigma_sq=1e-4)


def test_inactivity_is_free():
    out = step(CFG, State(y=0.02, h_prev=0.0), 0.0, 0.01)
    assert out.reward == 0.0
    assert out.net_pnl == 0.0
    assert out.cost == 0.0


def test_reward_hand_example():
    # h=100, y_next=0.01, gamma=0.01, Sigma=1e-4, lam=1e-3 (Lambda=1e-7)
    out = step(CFG, State(y=0.0, h_prev=0.0), 100.0, 0.01)
    assert out.reward == pytest.approx(1.0 - 0.005 - 0.0005, abs=1e-12)
    assert out.net_pnl == pytest.approx(0.9995, abs=1e-12)
    assert out.cost == pytest.approx(0.0005, abs=1e-15)
    assert out.next_state == State(y=0.01, h_prev=100.0)


def test_reward_decomposition_identity():
    rng = np.random.default_rng(0)
    for _ in range(200):
        s = State(y=float(rng.normal()), h_prev=float(rng.normal() * 1e3))
        dh = float(rng.normal() * 1e2)
        y_next = float(rng.normal() * 0.02)
        out = step(CFG, s, dh, y_next)
        h = s.h_prev + dh
        assert out.reward + 0.5 * CFG.gamma * h * h * CFG.sigma_sq == \
            pytest.approx(out.net_pnl, abs=1e-12)


def test_cost_symmetry():
    a = step(CFG, State(y=0.0, h_prev=5.0), 40.0, 0.0)
    b = step(CFG, State(y=0.0, h_prev=5.0), -40.0, 0.0)
    assert a.cost == b.cost


def test_step_rejects_non_finite():
    with pytest.raises(ValueError):
        step(CFG, State(y=0.0, h_prev=0.0), float("nan"), 0.0)
    with pytest.raises(ValueError):
        step(CFG, State(y=0.0, h_prev=0.0), 0.0, float("inf"))


def test_action_range_clipping():
    cfg = EnvConfig(gamma=0.01, lam=0.001, sigma_sq=1e-4,
                    action_range=ActionRange(-1.0, 1.0))
    out = step(cfg, State(y=0.0, h_prev=0.0), 1.0 + 5e-10, 0.0)
    assert out.next_state.h_prev == 1.0
    with pytest.raises(ValueError):
        step(cfg, State(y=0.0, h_prev=0.0), 1.1, 0.0)


def market():
    return FactorModelParams(loadings=[0.00535], half_lives=[350.0],
                             factor_vols=[0.2], asset_vol=0.01)


def test_zero_policy_all_zeros():
    path = simulate_factor_path(market(), 500, seed=1)
    perf = run_policy(CFG, path, lambda s: 0.0)
    assert np.all(perf.net_pnl == 0.0)
    assert np.all(perf.holding == 0.0)
    assert np.all(perf.cost == 0.0)


def test_run_policy_determinism_and_telescoping():
    path = simulate_factor_path(market(), 800, seed=2)
    rng = np.random.default_rng(3)
    dhs = rng.normal(size=799) * 50
    it = iter(dhs)
    perf1 = run_policy(CFG, path, lambda s: next(it), start_h=7.0)
    it = iter(dhs)
    perf2 = run_policy(CFG, path, lambda s: next(it), start_h=7.0)
    assert np.array_equal(perf1.net_pnl, perf2.net_pnl)
    assert perf1.holding[-1] == pytest.approx(7.0 + dhs.sum(), abs=1e-9)


def test_run_policy_rejects_non_finite_action():
    path = simulate_factor_path(market(), 100, seed=2)
    with pytest.raises(RuntimeError, match="non-finite"):
        run_policy(CFG, path, lambda s: float("nan"))


def test_gp_policy_profitable_on_its_own_model():
    """The closed-form strategy makes money on the process it was built
    for (mean across seeds; not asserted per seed)."""
    sol = solve_trading_rate(0.01, 0.001)
    cums = []
    for seed in range(10):
        path = simulate_factor_path(market(), 5001, seed=100 + seed)
        model = fit_fully_informed(path.factors, path.returns)
        perf = run_policy(CFG, path, gp_policy(sol.bind(model), model, path))
        cums.append(perf.cum_net_pnl())
    assert np.mean(cums) > 0


def test_gp_beats_cost_paying_markowitz_on_average():
    sol = solve_trading_rate(0.01, 0.001)
    diffs = []
    for seed in range(10):
        path = simulate_factor_path(market(), 50_001, seed=300 + seed)
        model = fit_fully_informed(path.factors, path.returns)
        sol.bind(model)
        gp = run_policy(CFG, path, gp_policy(sol, model, path))
        mk = run_policy(CFG, path, markowitz_policy(model, CFG.gamma, path))
        diffs.append(gp.reward.mean() - mk.reward.mean())
    assert np.mean(diffs) >= 0.0


def test_observation_series_modes():
    path = simulate_factor_path(market(), 50, seed=4)
    assert observation_series(path, "return") is None
    sig = observation_series(path, "signal")
    assert np.allclose(sig, path.factors[:, 0] * 0.00535)
    with pytest.raises(ValueError):
        observation_series(path, "nonsense")


def test_episode_len_truncation():
    path = simulate_factor_path(market(), 500, seed=5)
    cfg = EnvConfig(gamma=0.01, lam=0.001, sigma_sq=1e-4, episode_len=100)
    perf = run_policy(cfg, path, lambda s: 1.0)
    assert len(perf) == 100
    with pytest.raises(ValueError):
        run_policy(cfg, simulate_factor_path(market(), 50, seed=5),
                   lambda s: 0.0)
