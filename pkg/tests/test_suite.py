import numpy as np

from jumpdelay import solve_riccati, validate_model
from jumpdelay.oracle import full_path_count
from jumpdelay.suite import MAX_N, random_suite


def test_suite_valid_and_covering(suite):
    assert len(suite) >= 50
    combos = {(i.model.L, i.model.d, i.model.n, i.model.m) for i in suite}
    assert len(combos) == 36
    for inst in suite:
        assert validate_model(inst.model) == [], inst.name
        assert inst.model.N <= MAX_N[inst.model.L] <= 8
        assert np.all(inst.model.trans > 0)
        assert min(np.linalg.eigvalsh(R).min() for R in inst.model.R) > 0
        assert full_path_count(inst.model) <= 3**6


def test_suite_deterministic():
    a, b = random_suite(5), random_suite(5)
    for x, y in zip(a, b):
        assert x.name == y.name
        np.testing.assert_array_equal(x.model.A, y.model.A)
        np.testing.assert_array_equal(x.init.u_pre, y.init.u_pre)


def test_boundary_expectations(boundary):
    for inst in boundary:
        tab = solve_riccati(inst.model)
        assert tab.solvable == inst.expect_solvable, inst.name
    blind = next(i for i in boundary if i.name == "terminal_blind")
    assert solve_riccati(blind.model).failure == (blind.model.N - blind.model.d, 0)
