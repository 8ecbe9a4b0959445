import itertools

import numpy as np
import pytest

from conftest import uniform_pomdp
from oracles import all_windows, dense_pomdp_value, dense_superstate_value
from superstate.errors import NumericError, ParameterError
from superstate.estimation import from_exact
from superstate.exact import SuperstateModel, build_exact
from superstate.planning import (
    QTable,
    bellman_backup,
    greedy,
    mc_horizon,
    mc_pomdp_value,
    mc_superstate_value,
    optimal_superstate_value,
    policy_to_csv,
    pomdp_policy_value,
    superstate_policy_value,
    superstate_values,
    value_iteration,
    value_iteration_to_tolerance,
)
from superstate.pomdp import A1, O1, PROBE, TabularPomdp, random_pomdp
from superstate.windows import WindowIndex, WindowPolicy, random_policy

GAMMA = 0.95
V1_STAR = 0.41653846153846213  # brute force over all 3^7 window policies, frozen


@pytest.fixture(scope="module")
def probe_m1(probe):
    return build_exact(probe, 1)


def test_zero_iterations_returns_q0(probe_m1):
    q0 = QTable(probe_m1.idx, np.arange(21.0).reshape(7, 3))
    q = value_iteration(probe_m1, GAMMA, 0, q0)
    np.testing.assert_array_equal(q.values, q0.values)


def test_one_backup_is_reward(probe_m1):
    np.testing.assert_array_equal(value_iteration(probe_m1, GAMMA, 1).values, probe_m1.reward)


def test_bad_arguments(probe_m1):
    with pytest.raises(ParameterError):
        value_iteration(probe_m1, 1.0, 3)
    with pytest.raises(ParameterError):
        value_iteration(probe_m1, GAMMA, -1)
    with pytest.raises(ParameterError):
        value_iteration(probe_m1, GAMMA, 1, QTable.zeros(WindowIndex(3, 2, 2)))


@pytest.mark.parametrize("m", [1, 2, 3])
def test_contraction_and_error_bounds(probe, m):
    model = build_exact(probe, m)
    q_fix = value_iteration_to_tolerance(model, GAMMA, 1e-12).values
    for K in (1, 5, 20, 50, 120):
        q = value_iteration(model, GAMMA, K, check_contraction=True)
        err = np.abs(q.values - q_fix).max()
        assert err <= GAMMA**K * np.abs(q_fix).max() + 1e-10
        assert err <= 2 * GAMMA**K / (1 - GAMMA)
        assert np.abs(q.values).max() <= 1 / (1 - GAMMA) + 1e-9


def test_contraction_check_fires():
    # a warm start that is not a fixed point of anything sensible still
    # contracts; forcing a bogus model does not
    idx = WindowIndex(1, 1, 1)
    probs = np.ones((2, 1, 1)) * 2.0  # not a distribution: expansion
    model = SuperstateModel(idx, probs, np.ones((2, 1)), np.ones(2, dtype=bool))
    with pytest.raises(NumericError):
        value_iteration(model, 0.9, 5, check_contraction=True)


def test_greedy_ties_and_shift():
    idx = WindowIndex(3, 2, 1)
    assert (greedy(QTable.zeros(idx)).actions == 0).all()
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(idx.size, 3))
    base = greedy(QTable(idx, vals)).actions
    np.testing.assert_array_equal(base, vals.argmax(axis=1))
    for c in (-3.0, 0.5, 100.0):
        np.testing.assert_array_equal(greedy(QTable(idx, vals + c)).actions, base)


def test_probe_m1_optimum(probe_m1):
    v, pi = optimal_superstate_value(probe_m1, GAMMA)
    assert v == pytest.approx(V1_STAR, abs=1e-9)
    assert pi(((PROBE, O1),)) == A1
    q = value_iteration(probe_m1, GAMMA, 200)
    assert greedy(q)(((PROBE, O1),)) == A1


@pytest.mark.slow
def test_probe_m1_optimum_by_enumeration(probe):
    wins = all_windows(3, 2, 1)
    best = max(
        dense_superstate_value(probe, 1, lambda w, p=p: p[wins.index(w)], GAMMA)
        for p in itertools.product(range(3), repeat=len(wins))
    )
    assert best == pytest.approx(V1_STAR, abs=1e-12)


def test_tolerance_tightening(probe):
    model = build_exact(probe, 2)
    v1, _ = optimal_superstate_value(model, GAMMA, tol=1e-4)
    v2, _ = optimal_superstate_value(model, GAMMA, tol=1e-5)
    assert abs(v1 - v2) < 1e-4


def test_single_action_model():
    env = random_pomdp(2, 1, 2, 0.1, 0.1, seed=3)
    model = build_exact(env, 2)
    v, pi = optimal_superstate_value(model, 0.9)
    assert v == pytest.approx(superstate_policy_value(model, pi, 0.9), abs=1e-12)


def test_optimal_values_nondecreasing_in_m(probe):
    vals = [optimal_superstate_value(build_exact(probe, m), GAMMA)[0] for m in range(1, 5)]
    assert all(a <= b + 1e-9 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("timing", ["emitted", "previous"])
def test_evaluation_matches_dense_solve(small_random, timing):
    env = small_random.with_timing(timing)
    idx = WindowIndex(2, 2, 2)
    model = build_exact(env, 2)
    for seed in range(4):
        pi = random_policy(idx, seed)
        fn = pi
        assert superstate_policy_value(model, pi, 0.9) == pytest.approx(
            dense_superstate_value(env, 2, fn, 0.9), abs=1e-9
        )
        assert pomdp_policy_value(env, pi, 0.9) == pytest.approx(dense_pomdp_value(env, 2, fn, 0.9), abs=1e-9)


def test_constant_reward():
    env = uniform_pomdp(reward=np.full((2, 2), 0.3))
    model = build_exact(env, 2)
    pi = random_policy(model.idx, 1)
    np.testing.assert_allclose(superstate_values(model, pi, 0.9), 3.0, atol=1e-10)
    assert pomdp_policy_value(env, pi, 0.9) == pytest.approx(3.0, abs=1e-10)
    prev = env.with_timing("previous")
    assert pomdp_policy_value(prev, pi, 0.9) == pytest.approx(0.9 * 0.3 / 0.1, abs=1e-10)
    assert superstate_policy_value(build_exact(prev, 2), pi, 0.9) == pytest.approx(2.7, abs=1e-10)


def test_gamma_zero(probe, probe_prev):
    pi = WindowPolicy(WindowIndex(3, 2, 1), np.full(7, A1))
    assert superstate_policy_value(build_exact(probe_prev, 1), pi, 0.0) == 0.0
    assert superstate_policy_value(build_exact(probe, 1), pi, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert pomdp_policy_value(probe_prev, pi, 0.0) == 0.0


def perfect_observation_pomdp(seed=0, S=3, A=2):
    base = random_pomdp(S, A, S, 0.05, 0.0, seed=seed)
    obs = np.zeros((S, A, S))
    for s in range(S):
        obs[s, :, s] = 1.0
    rng = np.random.default_rng(seed)
    return TabularPomdp(base.trans, obs, rng.uniform(-1, 1, (S, A)), base.init_dist, 0.9)


def test_perfect_observation_agreement():
    env = perfect_observation_pomdp()
    model = build_exact(env, 1)
    for seed in range(5):
        pi = random_policy(model.idx, seed)
        assert superstate_policy_value(model, pi, 0.9) == pytest.approx(
            pomdp_policy_value(env, pi, 0.9), abs=1e-9
        )


def test_mc_matches_exact(probe):
    idx = WindowIndex(3, 2, 2)
    model = build_exact(probe, 2)
    for seed in range(2):
        pi = random_policy(idx, seed)
        mean, se = mc_pomdp_value(probe, pi, GAMMA, 20_000, seed=seed)
        assert abs(mean - pomdp_policy_value(probe, pi, GAMMA)) <= 3 * se
        mean, se = mc_superstate_value(model, pi, GAMMA, 20_000, seed=seed)
        assert abs(mean - superstate_policy_value(model, pi, GAMMA)) <= 3 * se


def test_mc_horizon():
    assert mc_horizon(0.95) == 238
    assert 0.95 ** mc_horizon(0.95) <= 1e-4 * 0.05


def perturb(model, eps, rng):
    O = model.idx.O
    noise = rng.uniform(-eps, eps, model.probs.shape[:2])
    delta = np.stack([noise, -noise], axis=-1) if O == 2 else None
    probs = np.clip(model.probs + delta, 0, 1)
    probs /= probs.sum(axis=2, keepdims=True)
    reward = np.clip(model.reward + rng.uniform(-eps, eps, model.reward.shape), -1, 1)
    return SuperstateModel(model.idx, probs, reward, model.reachable.copy())


@pytest.mark.parametrize("eps", [0.01, 0.05])
def test_simulation_lemma(probe, eps):
    model = build_exact(probe, 2)
    rng = np.random.default_rng(7)
    pols = [random_policy(model.idx, s) for s in range(3)] + [optimal_superstate_value(model, GAMMA)[1]]
    base = [superstate_policy_value(model, pi, GAMMA) for pi in pols]
    for _ in range(10):
        pert = perturb(model, eps, rng)
        for pi, v in zip(pols, base):
            assert abs(superstate_policy_value(pert, pi, GAMMA) - v) <= 2 * eps / (1 - GAMMA) ** 2


def test_unvisited_rows_back_up_reward_only(probe):
    exact = build_exact(probe, 1)
    est = from_exact(exact)
    probs = np.array(est.probs)
    probs[3] = 0.0
    model = SuperstateModel(exact.idx, probs, np.array(est.reward), est.reachable)
    q = bellman_backup(model, np.ones((7, 3)), GAMMA)
    np.testing.assert_allclose(q[3], est.reward[3])


def test_csv_dumps(probe_m1):
    q = value_iteration(probe_m1, GAMMA, 3)
    assert q.to_csv().splitlines()[0] == "window,action,q_value"
    assert len(q.to_csv().splitlines()) == 1 + 21
    text = policy_to_csv(greedy(q))
    assert text.splitlines()[0] == "window,chosen_action"
