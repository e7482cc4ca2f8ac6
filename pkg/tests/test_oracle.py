import numpy as np
import pytest

from jumpdelay import InitialData, JumpLinearModel, gains, solve_riccati
from jumpdelay.oracle import (
    HessianNotPD,
    PathBudgetExceeded,
    PolicyTree,
    build_qp,
    check_budget,
    expected_policy_cost,
    fixed_first_decision_cost,
    full_path_count,
    hessian_pd,
    solve_policy,
    solve_qp,
    standard_coupled_riccati,
    stationarity_residual,
    variable_count,
)
from jumpdelay.simulate import exact_expected_cost, schedule_to_policy
from jumpdelay.suite import random_instance

from conftest import scalar_model


def test_scalar_qp_hand_expanded(scalar, scalar_init):
    # decisions z = [u(0), u(1)], x1 = x0 + u(-1):
    # J = x0^2 + x1^2 + (x1+u0)^2 + u0^2 + (x1+u0+u1)^2 + u1^2
    qp = build_qp(scalar, scalar_init)
    x0, x1 = 0.7, 0.5
    np.testing.assert_allclose(qp.H, [[3.0, 1.0], [1.0, 2.0]], atol=1e-15)
    np.testing.assert_allclose(qp.b, [2 * x1, x1], atol=1e-15)
    assert qp.c == pytest.approx(x0**2 + 3 * x1**2, abs=1e-15)
    z, val = solve_qp(qp)
    np.testing.assert_allclose(z, -np.linalg.solve(qp.H, qp.b), atol=1e-15)
    assert val == pytest.approx(x0**2 + 1.6 * x1**2, abs=1e-14)


def test_variable_order(example):
    model, _ = example
    assert variable_count(model) == sum(2 ** (t + 1) for t in range(model.N - model.d + 1))
    z = np.arange(variable_count(model), dtype=float)
    tree = PolicyTree.from_vector(model, z)
    assert tree.decide(0, (1,))[0] == 1.0
    assert tree.decide(1, (0, 1))[0] == 2 + 1
    np.testing.assert_array_equal(tree.to_vector(), z)


def test_zero_input_matrix_decouples():
    model, init = random_instance(np.random.default_rng(8), 2, 2, 1, 2, 5)
    model = type(model)(A=model.A, B=np.zeros_like(model.B), Q=model.Q, R=model.R,
                        P_term=model.P_term, trans=model.trans, pi0=model.pi0, d=2, N=5)
    qp = build_qp(model, init)
    np.testing.assert_allclose(qp.H, np.diag(np.diag(qp.H)), atol=1e-15)
    assert not qp.b.any()


def test_qp_value_matches_enumeration(example):
    model, init = example
    rng = np.random.default_rng(0)
    tree = PolicyTree.from_vector(model, rng.standard_normal(variable_count(model)))
    assert expected_policy_cost(model, tree, init) == pytest.approx(
        exact_expected_cost(model, tree, init), rel=1e-12)


def test_stationarity_at_and_off_optimum(example):
    model, init = example
    policy, _, qp = solve_policy(model, init)
    scale = np.abs(qp.b).max()
    assert stationarity_residual(model, policy, init) / scale < 1e-9
    assert stationarity_residual(model, PolicyTree.zeros(model), init) / scale > 1e-3
    bumped = PolicyTree.from_vector(model, policy.to_vector() + 1e-3)
    assert stationarity_residual(model, bumped, init) / scale > 1e-6


def test_budget():
    model = scalar_model(N=6)
    assert full_path_count(model) == 1
    model3, init3 = random_instance(np.random.default_rng(1), 3, 1, 1, 1, 8)
    assert full_path_count(model3) == 3 ** 10
    with pytest.raises(PathBudgetExceeded):
        check_budget(model3, 1000)
    with pytest.raises(PathBudgetExceeded):
        build_qp(model3, init3, budget=1000)


def test_unsolvable_hessian():
    model = scalar_model(q=0.0, r=0.0, pf=0.0)
    qp = build_qp(model, InitialData.zeros(model))
    assert not hessian_pd(qp)
    with pytest.raises(HessianNotPD):
        solve_qp(qp)


def test_zero_probability_prefixes_inactive():
    one = np.ones((2, 1, 1))
    model = JumpLinearModel(A=one * 0.9, B=one, Q=one, R=one, P_term=one,
                            trans=np.array([[0.5, 0.5], [0.0, 1.0]]), pi0=np.array([0.0, 1.0]), d=1, N=3)
    init = InitialData([1.0], [[0.0]])
    qp = build_qp(model, init)
    assert not qp.active_mask().all()
    assert hessian_pd(qp)
    _, val = solve_qp(qp)
    sched = gains(solve_riccati(model))
    assert exact_expected_cost(model, sched, init) == pytest.approx(val, rel=1e-12)


def test_first_decision_cost_is_quadratic_form(example, example_tables):
    model, _ = example
    for l in range(model.L):
        for u0 in (1.0, -2.5):
            val = fixed_first_decision_cost(model, l, np.array([u0]))
            assert val == pytest.approx(u0 * example_tables.W[0, l, 0, 0] * u0, rel=1e-10)
    assert fixed_first_decision_cost(model, 0, np.array([1.0])) == pytest.approx(23.7186, abs=1e-4)


def test_standard_riccati_scalar():
    model = scalar_model(N=1)
    P, Ups, M, K = standard_coupled_riccati(model)
    # k=1: Ups = 2, M = 1, P = 1 + 1 - 1/2 = 1.5; k=0: Ups = 2.5, M = 1.5, P = 1 + 1.5 - 0.9 = 1.6
    np.testing.assert_allclose(Ups[:, 0, 0, 0], [2.5, 2.0])
    np.testing.assert_allclose(P[:, 0, 0, 0], [1.6, 1.5, 1.0])
    np.testing.assert_allclose(K[:, 0, 0, 0], [0.6, 0.5])


def test_standard_riccati_differs_from_delayed(example, example_tables):
    # ignoring the delay gives a different, wrong controller
    model, _ = example
    _, _, _, K = standard_coupled_riccati(model)
    assert np.abs(K[1, :, 0] - gains(example_tables).Kx[1, :, 0]).max() > 1e-3


def test_schedule_policy_round_trip(example, example_tables):
    model, init = example
    tree = schedule_to_policy(model, gains(example_tables), init)
    back = PolicyTree.from_vector(model, tree.to_vector())
    np.testing.assert_array_equal(back.to_vector(), tree.to_vector())
    assert len(tree.to_dict()["decisions"]) == variable_count(model)
