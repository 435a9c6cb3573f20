import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import assert_collision_free
from convrewrite import (
    DimensionMismatch,
    NonPositiveBaseline,
    bert_f1,
    cosine_similarity,
    relative_gain,
    score_question,
)
from convrewrite.metrics import bert_score_from_embeddings, cosine_score, harmonic_mean


def test_cosine_basic_cases():
    assert cosine_similarity(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == pytest.approx(1.0)
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 3.0])) == 0.0
    assert cosine_similarity(np.array([1.0, -2.0]), np.array([-1.0, 2.0])) == pytest.approx(-1.0)


def test_cosine_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        cosine_similarity(np.ones(3), np.ones(4))


def test_cosine_zero_vector_flagged():
    value, degenerate = cosine_score(np.zeros(4), np.ones(4))
    assert value == 0.0 and degenerate
    assert cosine_score(np.ones(4), np.ones(4))[1] is False


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vec = arrays(np.float64, 8, elements=finite)


@given(vec, vec, st.floats(1e-3, 1e3))
def test_cosine_properties(a, b, scale):
    c = cosine_similarity(a, b)
    assert -1.0 <= c <= 1.0
    assert c == pytest.approx(cosine_similarity(b, a), abs=1e-12)
    assert cosine_similarity(a * scale, b) == pytest.approx(c, abs=1e-9)
    if np.linalg.norm(a) > 1e-6:
        assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-9)


def test_bert_identical_text(embedder):
    s = bert_f1("compare monthly revenue by country", "compare monthly revenue by country", embedder)
    assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)


def test_bert_disjoint_text(embedder):
    assert_collision_free(["apple", "banana", "cherry", "delta"])
    s = bert_f1("apple banana", "cherry delta", embedder)
    assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)


def test_bert_subset(embedder):
    assert_collision_free(["compare", "orders", "by", "country"])
    s = bert_f1("compare orders", "compare orders by country", embedder)
    assert s.precision == 1.0
    assert s.recall == 0.5
    assert s.f1 == pytest.approx(2 / 3)


def test_bert_empty_is_degenerate(embedder):
    s = bert_f1("", "compare orders", embedder)
    assert s.degenerate and s.f1 == 0.0


def test_bert_negative_similarity_clamped():
    s = bert_score_from_embeddings(np.array([[1.0, 0.0]]), np.array([[-1.0, 0.0]]))
    assert s.precision == 0.0 and s.recall == 0.0


def test_harmonic_mean():
    assert harmonic_mean(0.0, 0.0) == 0.0
    assert harmonic_mean(1.0, 0.5) == pytest.approx(2 / 3)


def test_score_question_pinned(embedder):
    # 9 distinct collision-free tokens: gold has 4 one-count buckets, the
    # prediction 8; they share 3 (compare, orders, by) -> 3 / sqrt(4 * 8)
    tokens = ["compare", "orders", "by", "top", "5", "countries", "as", "bar", "country"]
    assert_collision_free(tokens)
    sc = score_question("compare orders by country", "compare orders by top-5 countries as bar", embedder)
    assert sc.cosine == pytest.approx(3 / math.sqrt(32), abs=1e-12)
    assert sc.bert_precision == pytest.approx(3 / 8)
    assert sc.bert_recall == pytest.approx(3 / 4)
    assert not sc.degenerate


def test_score_question_empty_prediction(embedder):
    sc = score_question("compare orders by country", "", embedder)
    assert sc.degenerate and sc.cosine == 0.0 and sc.bert_f1 == 0.0


@pytest.mark.parametrize(
    "a, b, expected",
    [(0.859, 0.826, 3.995157), (0.820, 0.760, 7.894737), (0.5, 0.5, 0.0), (0.4, 0.5, -20.0)],
)
def test_relative_gain(a, b, expected):
    assert relative_gain(a, b) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("b", [0.0, -0.1])
def test_relative_gain_bad_baseline(b):
    with pytest.raises(NonPositiveBaseline):
        relative_gain(0.5, b)
