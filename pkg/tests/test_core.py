import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_model
from regimehmm.core import (
    GaussianComponent,
    GaussianMixture,
    GmHmm,
    InitialDistribution,
    ModelError,
    ObservationSeq,
    StateSequence,
    TransitionMatrix,
    check_model,
    load_model,
    model_from_dict,
    model_to_dict,
    model_to_json,
    save_model,
    validate_model,
)


def _two_state(A, pi=(0.5, 0.5)):
    return GmHmm.from_arrays(A, pi, np.ones((2, 1)), [[[0.0]], [[1.0]]], [[[[1.0]]], [[[1.0]]]])


def test_valid_rows_ok():
    assert validate_model(_two_state([[0.5, 0.5], [0.3, 0.7]])) == []


def test_row_sum_violation_names_row_and_residual():
    v = validate_model(_two_state([[0.5, 0.4], [0.3, 0.7]]))
    assert len(v) == 1
    assert v[0].field == "transition row 1"
    assert "0.9" in str(v[0])
    assert v[0].residual == pytest.approx(-0.1)


def test_reference_model_is_valid(reference_model):
    assert validate_model(reference_model) == []
    assert (reference_model.R, reference_model.K, reference_model.n) == (2, 2, 1)
    np.testing.assert_allclose(reference_model.A, [[0.78, 0.22], [0.82, 0.18]])


def test_validate_idempotent_and_pure(reference_model):
    before = model_to_json(reference_model)
    assert validate_model(reference_model) == validate_model(reference_model)
    assert model_to_json(reference_model) == before


def test_violations_cover_all_fields():
    m = GmHmm.from_arrays(
        [[0.5, 0.6], [0.5, 0.5]], [0.7, 0.7], [[0.5, 0.6], [1.0, 0.0]],
        np.zeros((2, 2, 2)),
        [[[[1, 0.5], [0.4, 1]], np.eye(2)], [np.eye(2), [[1, 0], [0, -1]]]],
    )
    fields = {v.field for v in validate_model(m)}
    assert "transition row 1" in fields
    assert "pi" in fields
    assert "state 1 weights" in fields
    assert "state 2 component 2 cov" in fields
    assert any("symmetric" in v.constraint for v in validate_model(m))
    assert any("positive definite" in v.constraint or "eigen" in v.constraint for v in validate_model(m))
    with pytest.raises(ModelError):
        check_model(m)


def test_negative_probability_flagged():
    v = validate_model(_two_state([[1.2, -0.2], [0.5, 0.5]]))
    assert v and all(x.field == "transition row 1" for x in v)


def test_variance_floor_in_validation():
    m = _two_state([[0.5, 0.5], [0.5, 0.5]])
    assert validate_model(m, variance_floor=0.5) == []
    assert validate_model(m, variance_floor=2.0) != []


def test_shape_errors():
    with pytest.raises(ModelError):
        TransitionMatrix(np.ones((2, 3)))
    with pytest.raises(ModelError):
        GaussianMixture(np.array([1.0]), (GaussianComponent([0.0], [[1.0]]), GaussianComponent([0.0], [[1.0]])))
    with pytest.raises(ModelError):
        GmHmm(TransitionMatrix(np.eye(2)), InitialDistribution([1.0]), (GaussianMixture.single([0.0], [[1.0]]),))


def test_degenerate_r1_k1_supported():
    m = GmHmm.from_arrays([[1.0]], [1.0], [[1.0]], [[[0.0]]], [[[[1.0]]]])
    assert validate_model(m) == []
    assert (m.R, m.K, m.n) == (1, 1, 1)


def test_observation_seq():
    o = ObservationSeq([0.1, 0.2, 0.3], ("a", "b", "c"))
    assert (o.T, o.n) == (3, 1)
    assert o.obs.shape == (3, 1)
    with pytest.raises(ModelError):
        ObservationSeq(np.zeros((0, 1)))
    with pytest.raises(ModelError):
        ObservationSeq([0.1, np.nan])
    with pytest.raises(ModelError):
        ObservationSeq([0.1, 0.2], ("a",))
    both = o.concat(ObservationSeq([0.4], ("d",)))
    assert both.T == 4 and both.labels == ("a", "b", "c", "d")


def test_state_sequence_is_one_based():
    s = StateSequence.from_zero_based([0, 1, 1])
    assert s.tolist() == [1, 2, 2]
    assert s.zero_based.tolist() == [0, 1, 1]
    with pytest.raises(ModelError):
        StateSequence([0, 1])


def test_permuted_relabels_everything(reference_model):
    p = reference_model.permuted([1, 0])
    np.testing.assert_array_equal(p.A, reference_model.A[::-1, ::-1])
    np.testing.assert_array_equal(p.means[0], reference_model.means[1])
    np.testing.assert_array_equal(p.pi.pi, reference_model.pi.pi[::-1])


def test_json_schema_fields(reference_model):
    d = json.loads(model_to_json(reference_model))
    assert set(d) >= {"R", "n", "K", "transition", "pi", "mixtures"}
    assert set(d["mixtures"][0]) == {"weights", "means", "covs"}


def test_json_round_trip_exact(tmp_path):
    rng = np.random.default_rng(5)
    for R, K, n in [(1, 1, 1), (2, 2, 1), (3, 2, 2)]:
        m = random_model(rng, R, K, n)
        path = tmp_path / f"m{R}{K}{n}.json"
        save_model(m, path)
        back = load_model(path)
        np.testing.assert_array_equal(back.A, m.A)
        np.testing.assert_array_equal(back.covs, m.covs)
        np.testing.assert_array_equal(back.means, m.means)
        assert model_to_json(back) == model_to_json(m)


def test_malformed_json_raises():
    with pytest.raises(ModelError):
        model_from_dict({"R": 2})
    d = model_to_dict(GmHmm.from_arrays([[1.0]], [1.0], [[1.0]], [[[0.0]]], [[[[1.0]]]]))
    d["R"] = 3
    with pytest.raises(ModelError):
        model_from_dict(d)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), R=st.integers(1, 3), K=st.integers(1, 2), n=st.integers(1, 2))
def test_random_models_valid_and_round_trip(seed, R, K, n):
    m = random_model(np.random.default_rng(seed), R, K, n)
    assert validate_model(m) == []
    back = model_from_dict(json.loads(model_to_json(m)))
    np.testing.assert_array_equal(back.weights, m.weights)
