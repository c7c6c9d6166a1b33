import numpy as np
import pytest

from tradelab.agent_q import (DiscreteGrids, QTable, discretize,
                              epsilon_greedy, greedy_policy, q_update,
                              train_on_path)
from tradelab.benchmark import ActionRange
from tradelab.env import EnvConfig, State
from tradelab.schedules import LinearSchedule
from tradelab.sim import FactorModelParams, simulate_factor_path


def small_grids():
    return DiscreteGrids(returns=np.linspace(-0.05, 0.05, 11),
                         holdings=np.linspace(-1000, 1000, 5),
                         actions=np.array([-500.0, 0.0, 500.0]))


def test_default_grids_follow_lot_conventions():
    g = DiscreteGrids.default(ActionRange(-3800.0, 3700.0))
    assert len(g.returns) == 101
    assert len(g.holdings) == 201
    assert len(g.actions) == 5
    assert g.actions[2] == 0.0
    # lot multiples, inside the calibrated bound
    assert np.all(np.mod(g.actions, 1000.0) == 0)
    assert g.actions[-1] <= 3700.0
    assert g.table_size == 101 * 201 * 5


def test_discretize_exact_point_and_clamp():
    g = small_grids()
    assert discretize(g, State(y=-0.05, h_prev=0.0)) == (0, 2)
    assert discretize(g, State(y=0.02, h_prev=0.0))[0] == 7
    assert discretize(g, State(y=0.2, h_prev=-1e9)) == (10, 0)
    assert discretize(g, State(y=-0.2, h_prev=1e9)) == (0, 4)


def test_discretize_midpoint_goes_to_lower_bin():
    g = small_grids()
    # midpoint between bins 5 (0.0) and 6 (0.01)
    assert discretize(g, State(y=0.005, h_prev=0.0))[0] == 5
    # midpoint between holding bins 2 (0) and 3 (500)
    assert discretize(g, State(y=0.0, h_prev=250.0))[1] == 2


def test_q_update_full_overwrite_and_freeze():
    t = QTable(grids=small_grids(), alpha=1.0, rho=0.0)
    q_update(t, (1, 1), 2, 3.5, (0, 0))
    assert t.q[1, 1, 2] == 3.5
    t2 = QTable(grids=small_grids(), alpha=0.0, rho=0.9)
    q_update(t2, (1, 1), 2, 3.5, (0, 0))
    assert np.all(t2.q == 0.0)


def value_iteration_oracle(p_next, rewards, rho, iters=2000):
    """Q*(s,a) for a deterministic MDP given next-state and reward tables."""
    n_s, n_a = rewards.shape
    q = np.zeros((n_s, n_a))
    for _ in range(iters):
        v = q.max(axis=1)
        q = rewards + rho * v[p_next]
    return q


def test_two_state_chain_converges_to_value_iteration():
    # states {0,1}; action 0 stays, action 1 toggles; reward 1 for
    # arriving in state 1
    p_next = np.array([[0, 1], [1, 0]])
    rewards = np.array([[0.0, 1.0], [1.0, 0.0]])
    q_star = value_iteration_oracle(p_next, rewards, rho=0.9)
    t = QTable(grids=small_grids(), alpha=0.5, rho=0.9)
    for _ in range(500):
        for s in range(2):
            for a in range(2):
                q_update(t, (0, s), a, rewards[s, a], (0, p_next[s, a]))
    got = t.q[0, :2, :2]
    assert np.max(np.abs(got - q_star)) < 1e-6


def test_epsilon_greedy_exploit_and_tie_rule():
    t = QTable(grids=small_grids())
    rng = np.random.default_rng(0)
    t.q[0, 0] = [1.0, 5.0, 2.0]
    assert epsilon_greedy(t, (0, 0), 0.0, rng) == 1
    t.q[0, 1] = [3.0, 3.0, 3.0]  # exact tie -> smallest index
    assert epsilon_greedy(t, (0, 1), 0.0, rng) == 0


def test_epsilon_one_is_uniform():
    t = QTable(grids=small_grids())
    rng = np.random.default_rng(42)
    n = 100_000
    counts = np.zeros(3)
    for _ in range(n):
        counts[epsilon_greedy(t, (0, 0), 1.0, rng)] += 1
    sigma = np.sqrt(n * (1 / 3) * (2 / 3))
    assert np.all(np.abs(counts - n / 3) < 3 * sigma)


def test_linear_epsilon_schedule_endpoints():
    s = LinearSchedule(1.0, 0.01, 600)
    assert s.value(0) == 1.0
    assert s.value(300) == pytest.approx(0.505)
    assert s.value(600) == 0.01
    assert s.value(10_000) == 0.01


def test_training_reduces_unvisited_fraction():
    p = FactorModelParams(loadings=[0.00535], half_lives=[350.0],
                          factor_vols=[0.2], asset_vol=0.01)
    path = simulate_factor_path(p, 6001, seed=2)
    cfg = EnvConfig(gamma=0.01, lam=0.001, sigma_sq=1e-4)
    t = QTable(grids=small_grids(), alpha=0.1, rho=0.9,
               epsilon=LinearSchedule(1.0, 0.05, 3000))
    rng = np.random.default_rng(0)
    fracs = [t.fraction_unvisited()]
    for k in range(3):
        train_on_path(t, cfg, path, rng, t_start=2000 * k, n_steps=2000)
        fracs.append(t.fraction_unvisited())
    assert all(a >= b for a, b in zip(fracs, fracs[1:]))
    assert fracs[-1] < fracs[0]


def test_greedy_policy_reads_table():
    t = QTable(grids=small_grids())
    t.q[5, 2] = [0.0, 0.0, 9.0]
    pol = greedy_policy(t)
    assert pol(State(y=0.0, h_prev=0.0)) == 500.0


def test_qtable_checkpoint_roundtrip(tmp_path):
    t = QTable(grids=small_grids(), alpha=0.2, rho=0.8,
               epsilon=LinearSchedule(0.9, 0.02, 123))
    rng = np.random.default_rng(1)
    t.q[...] = rng.standard_normal(t.q.shape)
    t.visits[...] = rng.integers(0, 5, t.visits.shape)
    prefix = str(tmp_path / "ck")
    t.save(prefix)
    back = QTable.load(prefix)
    assert np.array_equal(back.q, t.q)
    assert np.array_equal(back.visits, t.visits)
    assert back.alpha == t.alpha and back.rho == t.rho
    assert back.epsilon == t.epsilon
    assert np.array_equal(back.grids.actions, t.grids.actions)


def test_visit_decay_learning_rate():
    t = QTable(grids=small_grids(), alpha=1.0, rho=0.0, visit_decay=True)
    q_update(t, (0, 0), 0, 1.0, (0, 0))   # alpha/1 -> q = 1
    q_update(t, (0, 0), 0, 0.0, (0, 0))   # alpha/2 -> q = 0.5
    assert t.q[0, 0, 0] == pytest.approx(0.5)
