import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumpdelay import WNotPositiveDefinite, solve_riccati, table_identity_residual
from jumpdelay.riccati import (
    factorization_gap,
    lambda_expectation,
    tables_from_dict,
    tables_to_dict,
    terminal_window_ok,
)
from jumpdelay.suite import random_instance

from conftest import scalar_model


def test_scalar_hand_unrolled(scalar):
    # A=B=Q=R=P_term=1, d=1, N=2, unrolled by hand:
    # t=1: W = R + P_term = 2, T0 = 1; t=0: W = R + Q + (P - P0)(1) = 2.5, T0 = 1.5
    tab = solve_riccati(scalar)
    np.testing.assert_allclose(tab.W[:2].ravel(), [2.5, 2.0], atol=1e-15)
    np.testing.assert_allclose(tab.T0[:2].ravel(), [1.5, 1.0], atol=1e-15)
    np.testing.assert_allclose(tab.P.ravel(), [2.5, 2.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(tab.P0.ravel(), [0.9, 0.5, 0.0], atol=1e-15)


def test_last_decision_is_two_step_average(example, example_tables):
    # W(N-d) = sum over theta(N) of [trans^2]_{l,.} (B'P_term B + R), P_term = I
    model, _ = example
    t = model.N - model.d
    direct = np.array([(model.B[l].T @ model.B[l] + model.R[l])[0, 0] for l in range(2)])
    expected = np.linalg.matrix_power(model.trans, 2) @ direct
    np.testing.assert_allclose(expected, [3.64, 5.08], atol=1e-12)
    np.testing.assert_allclose(example_tables.W[t, :, 0, 0], expected, atol=1e-12)


def test_reference_rows_match(example_tables):
    # decision time t = 1 row of the reference table
    tab = example_tables
    np.testing.assert_allclose(tab.W[1, :, 0, 0], [23.6031, 26.7636], atol=1e-3)
    np.testing.assert_allclose(tab.T0[1, 0, 0], [12.2690, 7.5948], atol=1e-3)
    np.testing.assert_allclose(tab.Tu[0, 1, :, 0, 0], [21.8683, 24.7279], atol=1e-3)


def test_terminal_window(example_tables):
    tab = example_tables
    assert terminal_window_ok(tab)
    lo = tab.N - tab.d + 1
    np.testing.assert_array_equal(tab.W[lo:], np.broadcast_to(np.eye(1), tab.W[lo:].shape))
    # only the final time carries zero delta seeds
    assert not tab.delta[:, tab.N].any()


def test_zero_input_matrix():
    rng = np.random.default_rng(3)
    model, _ = random_instance(rng, 2, 2, 1, 2, 5)
    model = type(model)(A=model.A, B=np.zeros_like(model.B), Q=model.Q, R=model.R,
                        P_term=model.P_term, trans=model.trans, pi0=model.pi0, d=2, N=5)
    tab = solve_riccati(model)
    for t in range(model.N - model.d + 1):
        for l in range(model.L):
            avgR = lambda_expectation(model, l, model.d, lambda p: model.R[p.end])
            np.testing.assert_allclose(tab.W[t, l], avgR, atol=1e-14)
    assert not tab.T0.any() and not tab.Tu.any()


def test_lambda_expectation_constants(example):
    model, _ = example
    one = lambda_expectation(model, 0, 3, lambda p: np.ones(1))
    np.testing.assert_allclose(one, [1.0], atol=1e-15)


def test_factorization_gap_nonzero(example):
    model, init = example
    u = lambda i: init.u_pre[i] if i < model.d else np.zeros(1)
    gap = factorization_gap(model, model.d, 0, init.x0, u)
    assert gap > 1e-6


def test_failure_reported():
    model = scalar_model(q=0.0, r=0.0, pf=0.0)
    tab = solve_riccati(model)
    assert not tab.solvable
    assert tab.failure == (model.N - model.d, 0)
    with pytest.raises(WNotPositiveDefinite) as err:
        solve_riccati(model, raise_on_failure=True)
    assert err.value.t == model.N - model.d


def test_json_round_trip_bit_identical(example_tables):
    doc = tables_to_dict(example_tables)
    text = json.dumps(doc)
    back = tables_from_dict(json.loads(text))
    assert json.dumps(tables_to_dict(back)) == text
    for name in ("W", "T0", "Tu", "P", "P0", "delta"):
        np.testing.assert_array_equal(getattr(back, name), getattr(example_tables, name))


def test_symmetry(example_tables):
    for arr in (example_tables.W, example_tables.P, example_tables.P0):
        np.testing.assert_array_equal(arr, np.swapaxes(arr, -1, -2))


def test_identities_on_example(example, example_tables):
    assert table_identity_residual(example[0], example_tables) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 4), st.integers(1, 2), st.integers(1, 2))
def test_identities_random(seed, L, d, n, m):
    N = d + 2
    model, _ = random_instance(np.random.default_rng(seed), L, n, m, d, N)
    tab = solve_riccati(model)
    assert tab.solvable
    assert table_identity_residual(model, tab) < 1e-9
    assert tab.max_asymmetry < 1e-12
