import math
import random

import pytest
from hypothesis import given, strategies as st

from graphforge.errors import DomainError, EmptyInput
from graphforge import payload as payload_mod
from graphforge.metrics import (
    ScalarPrediction,
    SetPrediction,
    StepTrace,
    accuracy,
    f1,
    jaccard,
    mdre,
    mlre,
    msle,
    smape,
    step_score,
)


def sp(predicted, truth):
    return SetPrediction(frozenset(predicted), frozenset(truth))


def pairs(*values):
    return [ScalarPrediction(p, t) for p, t in values]


# -- jaccard -------------------------------------------------------------


def test_jaccard_examples():
    assert jaccard(sp({"a", "b"}, {"b", "c"})) == pytest.approx(1 / 3)
    assert jaccard(sp({"a", "b"}, {"a", "b"})) == 1.0
    assert jaccard(sp(set(), set())) == 1.0  # documented both-empty convention


# -- f1 -------------------------------------------------------------------


def test_f1_examples():
    precision, recall, score = f1(sp({"a", "b"}, {"a", "c", "d"}))
    assert precision == 0.5
    assert recall == pytest.approx(1 / 3)
    assert score == pytest.approx(0.4)
    assert f1(sp({"a"}, {"b"}))[2] == 0.0
    assert f1(sp({"a", "b"}, {"a", "b"})) == (1.0, 1.0, 1.0)
    assert f1(sp(set(), set())) == (1.0, 1.0, 1.0)
    assert f1(sp(set(), {"a"})) == (0.0, 0.0, 0.0)


# -- accuracy ----------------------------------------------------------------


def test_accuracy_examples():
    assert accuracy([(1, 1), (0, 0), (1, 1), (0, 1), (1, 1)]) == 0.8
    assert accuracy([(1, 1)] * 4) == 1.0
    assert accuracy([(0, 1), (1, 0)]) == 0.0
    with pytest.raises(EmptyInput):
        accuracy([])


# -- mdre ------------------------------------------------------------------------


def test_mdre_examples():
    assert mdre(pairs((10, 10), (5, 10), (20, 10))) == pytest.approx(0.5, rel=1e-6)
    assert mdre(pairs((3, 3), (7, 7))) == 0.0
    value = mdre(pairs((1, 0)))
    assert math.isfinite(value)
    assert value == pytest.approx(1 / 1e-6, rel=1e-9)  # epsilon-dominated


def test_mdre_even_length_lower_middle():
    # documented convention: the lower middle of the sorted errors
    assert mdre(pairs((10, 10), (5, 10), (20, 10), (30, 10))) == pytest.approx(0.5, rel=1e-6)


# -- msle ------------------------------------------------------------------------


def test_msle_examples():
    assert msle(pairs((0, 0))) == 0.0
    assert msle(pairs((math.e - 1, 0))) == pytest.approx(1.0)
    assert msle(pairs((4, 4), (9, 9))) == 0.0
    with pytest.raises(DomainError):
        msle(pairs((-2 + 1e-9, 0)))


# -- smape ------------------------------------------------------------------------


def test_smape_examples():
    assert smape(pairs((0, 5))) == 2.0
    assert smape(pairs((7, 7))) == 0.0
    assert smape(pairs((3, 1))) == 1.0
    assert smape(pairs((0, 0))) == 0.0  # both-zero convention contributes 0


# -- mlre ------------------------------------------------------------------------


def test_mlre_examples():
    assert mlre(pairs((5, 5))) == 0.0
    assert mlre(pairs((10, 5))) == pytest.approx(math.log(2), rel=1e-4)
    assert mlre(pairs((10, 5))) == pytest.approx(mlre(pairs((5, 10))), rel=1e-9)


def test_mlre_single_pair_ratio():
    for k in (2, 3, 10):
        assert mlre(pairs((k * 7, 7))) == pytest.approx(math.log(k), rel=1e-4)


# -- step score --------------------------------------------------------------------


def test_step_score_examples():
    def scalar_pair(a, b):
        return (payload_mod.scalar(a), payload_mod.scalar(b))

    trace = StepTrace([scalar_pair(1, 1), scalar_pair(2, 2), scalar_pair(3, 3), scalar_pair(4, 9), scalar_pair(5, 5)])
    assert step_score(trace) == 0.8
    assert step_score(StepTrace([scalar_pair(i, i) for i in range(3)])) == 1.0
    tol = StepTrace([scalar_pair(1.0 + 5e-10, 1.0)])
    assert step_score(tol) == 1.0  # within the 1e-9 tolerance


def test_step_trace_requires_steps():
    with pytest.raises(EmptyInput):
        StepTrace([])


def test_step_score_payload_kinds():
    trace = StepTrace(
        [
            (payload_mod.entity_set(["a", "b"]), payload_mod.entity_set(["b", "a"])),
            (payload_mod.rows([[1, 2]]), payload_mod.rows([[1, 2]])),
            (payload_mod.rows([[1, 2]]), payload_mod.rows([[2, 1]])),
        ]
    )
    assert step_score(trace) == pytest.approx(2 / 3)


# -- properties -----------------------------------------------------------------------


@given(
    st.sets(st.text(min_size=1, max_size=4), max_size=8),
    st.sets(st.text(min_size=1, max_size=4), max_size=8),
)
def test_set_metric_bounds(a, b):
    p = sp(a, b)
    assert 0.0 <= jaccard(p) <= 1.0
    precision, recall, score = f1(p)
    for v in (precision, recall, score):
        assert 0.0 <= v <= 1.0


@given(st.lists(st.tuples(st.floats(0, 1e6), st.floats(0, 1e6)), min_size=1, max_size=20))
def test_numeric_metric_bounds(raw):
    ps = pairs(*raw)
    assert mdre(ps) >= 0
    assert msle(ps) >= 0
    assert 0.0 <= smape(ps) <= 2.0
    assert mlre(ps) >= 0


def test_randomized_bounds_bulk():
    rng = random.Random(42)
    for _ in range(2000):
        ps = pairs(*[(rng.uniform(0, 1e5), rng.uniform(0, 1e5)) for _ in range(rng.randint(1, 6))])
        assert mdre(ps) >= 0 and msle(ps) >= 0 and mlre(ps) >= 0
        assert 0.0 <= smape(ps) <= 2.0


def test_perfect_prediction_fixed_point():
    rng = random.Random(7)
    values = [rng.uniform(0, 100) for _ in range(9)]
    ps = pairs(*[(v, v) for v in values])
    assert mdre(ps) == 0.0
    assert msle(ps) == 0.0
    assert smape(ps) == 0.0
    assert mlre(ps) == 0.0
    keys = {f"k{i}" for i in range(5)}
    assert jaccard(sp(keys, keys)) == 1.0
    assert f1(sp(keys, keys))[2] == 1.0


def test_permutation_invariance():
    raw = [(3, 4), (10, 2), (5, 5), (0.5, 1.5)]
    for metric in (mdre, msle, smape, mlre):
        forward = metric(pairs(*raw))
        backward = metric(pairs(*reversed(raw)))
        assert forward == pytest.approx(backward, rel=1e-12)


def test_scalar_prediction_rejects_nonfinite():
    with pytest.raises(DomainError):
        ScalarPrediction(float("nan"), 1.0)
    with pytest.raises(DomainError):
        ScalarPrediction(1.0, float("inf"))


def test_key_canonicalization():
    p = SetPrediction.from_keys([" A ", "b"], ["a", "B "])
    assert jaccard(p) == 1.0
