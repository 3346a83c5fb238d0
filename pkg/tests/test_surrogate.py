import json

import numpy as np
import pytest

from pc2.basis import DomainScaling, design_matrix, total_degree_index_set
from pc2.surrogate import (ChecksumMismatch, DesignSystem, ModelFormatError, RankDeficient,
                           SurrogateModel, UnderdeterminedSystem, dumps, evaluate, evaluate_partial,
                           load, loads, ols_solve, save, write_predictions_csv)


@pytest.fixture
def model():
    sc = DomainScaling(((0.0, 2.0), (-1.0, 1.0)), ("legendre", "hermite"))
    idx = total_degree_index_set(2, 3)
    c = np.random.default_rng(0).normal(size=len(idx))
    return SurrogateModel(sc, idx, c, ("x", "xi"), 1, {"note": "test"})


def test_ols_matches_lstsq():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(60, 12))
    y = rng.normal(size=60)
    ref = np.linalg.lstsq(A, y, rcond=None)[0]
    assert np.allclose(ols_solve(DesignSystem(A, y)), ref, atol=1e-12)


def test_ols_rejects_singular_and_underdetermined_systems():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    with pytest.raises(RankDeficient):
        ols_solve(DesignSystem(np.column_stack([A, A[:, 0]]), y))
    with pytest.raises(UnderdeterminedSystem):
        ols_solve(DesignSystem(A[:3], y[:3]))


def test_evaluate_is_design_times_coefficients(model):
    X = np.array([[0.5, 0.2], [1.5, -2.0]])
    assert np.allclose(evaluate(model, X), design_matrix(model.indices, model.scaling, X) @ model.coefficients)
    assert isinstance(model(np.array([0.5, 0.2])), float)


def test_partial_derivative_by_finite_differences(model):
    X = np.array([[0.7, 0.3]])
    h = 1e-6
    fd = (model(X + [h, 0]) - model(X - [h, 0])) / (2 * h)
    assert evaluate_partial(model, X, (1, 0)) == pytest.approx(fd[0], rel=1e-6)


def test_roundtrip_is_exact_and_byte_stable(model, tmp_path):
    p = save(model, tmp_path / "m.json")
    back = load(p)
    assert np.array_equal(back.coefficients, model.coefficients)
    assert back.scaling == model.scaling and back.variables == model.variables
    assert dumps(back) == p.read_text()


def test_corrupted_file_detected(model):
    text = dumps(model)
    payload = json.loads(text)
    payload["coefficients"][0] = (1.5).hex()
    with pytest.raises(ChecksumMismatch):
        loads(json.dumps(payload))
    with pytest.raises(ModelFormatError):
        loads("not json")


def test_coefficient_count_checked(model):
    with pytest.raises(ValueError):
        SurrogateModel(model.scaling, model.indices, model.coefficients[:-1])


def test_predictions_csv(model, tmp_path):
    X = np.array([[0.1, 0.0], [0.2, 0.5]])
    p = write_predictions_csv(tmp_path / "p.csv", X, model(X), model.variables)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,xi,prediction" and len(lines) == 3
