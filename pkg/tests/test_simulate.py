import numpy as np
import pytest

from jumpdelay import InitialData, JumpLinearModel, exact_expected_cost, gains, monte_carlo_cost, rollout, sample_chain, solve_riccati
from jumpdelay.simulate import _rng, iter_trajectories, realized_cost



def test_stream_contract():
    # SeedSequence(entropy=seed, spawn_key=(run,)) -> PCG64 -> Generator.random()
    ss = np.random.SeedSequence(entropy=11, spawn_key=(4,))
    ref = np.random.Generator(np.random.PCG64(ss)).random(3)
    np.testing.assert_array_equal(_rng(11, 4).random(3), ref)
    assert _rng(0).random() == 0.6369616873214543


def test_inverse_cdf_draws(example):
    model, _ = example
    u = _rng(5, 2).random(model.N + 2)
    modes = sample_chain(model, 5, 2)
    assert modes[0] == int(u[0] >= model.pi0[0])
    for k in range(1, model.N + 2):
        assert modes[k] == int(u[k] >= model.trans[modes[k - 1], 0])


def test_sample_chain_deterministic(example):
    model, _ = example
    np.testing.assert_array_equal(sample_chain(model, 3, 7), sample_chain(model, 3, 7))


def test_degenerate_chain():
    A = np.stack([np.eye(1) * 0.5, np.eye(1) * 2.0])
    one = np.ones((2, 1, 1))
    model = JumpLinearModel(A=A, B=one, Q=one, R=one, P_term=one,
                            trans=np.array([[0.0, 1.0], [0.0, 1.0]]), pi0=np.array([1.0, 0.0]), d=1, N=4)
    modes = sample_chain(model, 0, 0)
    np.testing.assert_array_equal(modes, [0, 1, 1, 1, 1, 1])


def test_transition_frequencies(example):
    model, _ = example
    long = JumpLinearModel(A=model.A, B=model.B, Q=model.Q, R=model.R, P_term=model.P_term,
                           trans=model.trans, pi0=model.pi0, d=model.d, N=100_000)
    modes = sample_chain(long, 123)
    counts = np.zeros((2, 2))
    np.add.at(counts, (modes[:-1], modes[1:]), 1)
    for i in range(2):
        n = counts[i].sum()
        p = model.trans[i, 0]
        sigma = np.sqrt(p * (1 - p) / n)
        assert abs(counts[i, 0] / n - p) < 3 * sigma


def test_rollout_consistent(example, example_tables):
    model, init = example
    sched = gains(example_tables)
    traj = rollout(model, sched, init, sample_chain(model, 0, 0))
    assert traj.dynamics_residual(model) < 1e-12
    assert traj.cost == realized_cost(model, traj.modes, traj.states, traj.decisions)
    assert traj.states.shape == (model.N + 2, 2)
    assert traj.decisions.shape == (model.N - model.d + 1 + model.d, 1)
    with pytest.raises(ValueError):
        rollout(model, sched, init, [0, 1])


def test_deterministic_chain_single_rollout():
    one = np.ones((1, 1, 1))
    model = JumpLinearModel(A=one * 1.2, B=one, Q=one, R=one, P_term=one,
                            trans=np.ones((1, 1)), pi0=np.ones(1), d=2, N=5)
    init = InitialData([1.0], [[0.5], [-0.5]])
    sched = gains(solve_riccati(model))
    traj = rollout(model, sched, init, np.zeros(model.N + 2, dtype=int))
    assert exact_expected_cost(model, sched, init) == pytest.approx(traj.cost, rel=1e-14)


def test_monte_carlo_reproducible_and_thread_independent(example, example_tables):
    model, init = example
    sched = gains(example_tables)
    a = monte_carlo_cost(model, sched, init, 300, seed=9)
    b = monte_carlo_cost(model, sched, init, 300, seed=9, workers=4)
    assert a == b
    assert monte_carlo_cost(model, sched, init, 300, seed=10) != a


def test_monte_carlo_near_exact(example, example_tables):
    model, init = example
    sched = gains(example_tables)
    mean, se = monte_carlo_cost(model, sched, init, 2000, seed=1)
    exact = exact_expected_cost(model, sched, init)
    assert abs(mean - exact) < 4 * se


def test_iter_matches_monte_carlo(example, example_tables):
    model, init = example
    sched = gains(example_tables)
    costs = [t.cost for t in iter_trajectories(model, sched, init, 20, seed=2)]
    mean, _ = monte_carlo_cost(model, sched, init, 20, seed=2)
    assert np.mean(costs) == pytest.approx(mean, rel=1e-15)


def test_runs_must_be_positive(example, example_tables):
    model, init = example
    with pytest.raises(ValueError):
        monte_carlo_cost(model, gains(example_tables), init, 0)
