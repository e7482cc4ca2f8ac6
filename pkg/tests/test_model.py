import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumpdelay import InitialData, JumpLinearModel, ModelError, enumerate_paths, f_product, validate_model
from jumpdelay.model import load_model, model_from_dict, model_to_dict, path_probability


def test_example_shapes(example):
    model, init = example
    assert (model.L, model.n, model.m, model.d, model.N) == (2, 2, 1, 2, 7)
    assert validate_model(model) == []
    np.testing.assert_array_equal(init.x0, [2.0, 2.0])
    np.testing.assert_array_equal(init.u_pre, [[-2.0], [-1.0]])


def test_f_product_latest_mode_leftmost(example):
    model, _ = example
    np.testing.assert_allclose(f_product(model, (0, 1)), [[1.6, 0.88], [-1.02, -0.48]], atol=1e-15)
    np.testing.assert_array_equal(f_product(model, ()), np.eye(2))


def test_two_step_paths_from_mode_one(example):
    model, _ = example
    paths = enumerate_paths(model, 0, 2)
    assert [p.modes for p in paths] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    np.testing.assert_allclose([p.weight for p in paths], [0.81, 0.09, 0.03, 0.07], atol=1e-15)
    assert all(p.start_time == 1 for p in paths)


def test_path_probability(example):
    model, _ = example
    assert path_probability(model, (1, 0, 0)) == pytest.approx(0.5 * 0.3 * 0.9, abs=1e-15)
    assert path_probability(model, ()) == 1.0


def test_non_stochastic_row_rejected(example):
    model, init = example
    doc = model_to_dict(model, init)
    doc["trans"][1] = [0.3, 0.6]
    with pytest.raises(ModelError) as err:
        model_from_dict(doc)
    assert any("row 2 not stochastic" in p for p in err.value.problems)


@pytest.mark.parametrize("field, value, fragment", [
    ("d", 0, "delay must be >= 1"),
    ("N", 2, "horizon must exceed the delay"),
    ("Q", [[[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]], "Q[1]: not symmetric"),
    ("R", [[[-1.0]], [[2.0]]], "R[1]: not positive semidefinite"),
])
def test_invalid_fields_reported(example, field, value, fragment):
    model, init = example
    doc = model_to_dict(model, init)
    doc[field] = value
    if field == "d":
        doc["u_pre"] = []
    with pytest.raises(ModelError) as err:
        model_from_dict(doc)
    assert any(fragment in p for p in err.value.problems), err.value.problems


def test_unknown_and_missing_fields(example):
    model, init = example
    doc = model_to_dict(model, init)
    doc["colour"] = "blue"
    del doc["pi0"]
    with pytest.raises(ModelError) as err:
        model_from_dict(doc)
    assert "pi0: missing" in err.value.problems
    assert "colour: unknown field" in err.value.problems


def test_initial_data_shape_checked(example):
    model, _ = example
    with pytest.raises(ModelError):
        InitialData(np.zeros(2), np.zeros((1, 1))).check(model)


def test_file_round_trip(example, tmp_path):
    model, init = example
    path = tmp_path / "m.json"
    path.write_text(json.dumps(model_to_dict(model, init)))
    m2, i2 = load_model(path)
    for name in ("A", "B", "Q", "R", "P_term", "trans", "pi0"):
        np.testing.assert_array_equal(getattr(m2, name), getattr(model, name))
    np.testing.assert_array_equal(i2.u_pre, init.u_pre)


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ModelError):
        load_model(path)


@st.composite
def chains(draw):
    L = draw(st.integers(1, 3))
    rows = []
    for _ in range(L):
        w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=L, max_size=L)))
        rows.append(w / w.sum())
    trans = np.array(rows)
    trans[:, -1] = 1.0 - trans[:, :-1].sum(axis=1)
    A = np.array(draw(st.lists(st.floats(-2, 2), min_size=4 * L, max_size=4 * L))).reshape(L, 2, 2)
    I = np.stack([np.eye(2)] * L)
    model = JumpLinearModel(A=A, B=np.ones((L, 2, 1)), Q=I, R=np.ones((L, 1, 1)), P_term=I,
                            trans=trans, pi0=np.full(L, 1.0 / L), d=1, N=3)
    return model


@settings(max_examples=60, deadline=None)
@given(chains(), st.integers(0, 4), st.data())
def test_path_weights_sum_to_one(model, steps, data):
    start = data.draw(st.integers(0, model.L - 1))
    total = sum(p.weight for p in enumerate_paths(model, start, steps))
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(chains(), st.data())
def test_f_product_splits(model, data):
    a = data.draw(st.lists(st.integers(0, model.L - 1), max_size=4))
    b = data.draw(st.lists(st.integers(0, model.L - 1), max_size=4))
    lhs = f_product(model, a + b)
    rhs = f_product(model, b) @ f_product(model, a)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
