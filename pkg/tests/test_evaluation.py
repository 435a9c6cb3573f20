import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convrewrite import (
    QUERY_FUSION,
    QUERY_REWRITE,
    IdentityMock,
    RuleFusionMock,
    ScriptedMock,
    SyntheticProfile,
    TaskType,
    generate_synthetic,
    load_dataset,
    run_eval,
)
from convrewrite.datasets import AnnotatedQuestion, Conversation, Dataset
from convrewrite.evaluation import aggregate, build_report, load_score_fixture, render_gains, render_table
from convrewrite.fixtures import REPORTED_AGGREGATES, TASK_LABELS, score_fixture_path
from convrewrite.metrics import QuestionScore


def test_table1_fusion_scores_perfect(table1_path, embedder):
    report = run_eval(load_dataset(table1_path), [QUERY_FUSION], RuleFusionMock(), embedder)
    agg = report.aggregates["query_fusion"]
    assert agg.n == 10
    assert agg.mean_cosine == pytest.approx(1.0, abs=1e-12)
    assert agg.mean_bert_f1 == pytest.approx(1.0, abs=1e-12)
    assert report.history_aggregates["query_fusion"].n == 9
    assert not report.failures


def test_empty_dataset(embedder):
    report = run_eval(Dataset("empty", TaskType.TEXT_QA), [QUERY_FUSION, QUERY_REWRITE], IdentityMock(), embedder)
    assert all(a.n == 0 and a.mean_cosine is None for a in report.aggregates.values())
    assert report.gains == []
    assert "-" in render_table([report])


@pytest.mark.parametrize("name", sorted(REPORTED_AGGREGATES))
def test_score_fixtures_reproduce_reported_means(name):
    report = load_score_fixture(score_fixture_path(name), task_label=TASK_LABELS[name])
    for approach, (cos, f1) in REPORTED_AGGREGATES[name].items():
        agg = report.aggregates[approach]
        assert agg.mean_cosine == pytest.approx(cos, abs=1e-9)
        assert agg.mean_bert_f1 == pytest.approx(f1, abs=1e-9)


def test_qa_fixture_table_text():
    report = load_score_fixture(score_fixture_path("text_qa"), task_label=TASK_LABELS["text_qa"])
    table = render_table([report])
    assert "Query Fusion" in table and "0.826" in table and "0.751" in table
    assert "0.859" in table and "0.828" in table
    gains = render_gains(report)
    assert "Query Rewrite vs Query Fusion [cosine]: +4.0%" in gains


def test_failures_drop_conversation(embedder):
    ds = Dataset("d", TaskType.TEXT_TO_VIS, (
        Conversation("good", (AnnotatedQuestion(1, "compare orders by country", gold_rewrite="compare orders by country"),)),
        Conversation("bad", (AnnotatedQuestion(1, "unknown thing", gold_rewrite="unknown thing"),)),
    ))
    model = ScriptedMock([("compare orders by country", "compare orders by country")], strict=True)
    report = run_eval(ds, [QUERY_FUSION], model, embedder)
    assert [f.conversation_id for f in report.failures] == ["bad"]
    assert report.aggregates["query_fusion"].n == 1


def test_parallel_matches_serial(embedder):
    ds = generate_synthetic(SyntheticProfile(TaskType.TEXT_TO_VIS, 12, (2, 8), seed=5))
    serial = run_eval(ds, [QUERY_FUSION, QUERY_REWRITE], RuleFusionMock(), embedder)
    parallel = run_eval(ds, [QUERY_FUSION, QUERY_REWRITE], RuleFusionMock(), embedder, jobs=4)
    assert serial.scores == parallel.scores
    assert serial.aggregates == parallel.aggregates


def test_history_subset_excludes_first_turns(embedder):
    ds = generate_synthetic(SyntheticProfile(TaskType.TEXT_TO_VIS, 3, (4, 4), seed=2))
    report = run_eval(ds, [QUERY_REWRITE], RuleFusionMock(), embedder)
    assert report.aggregates["query_rewrite"].n == 12
    assert report.history_aggregates["query_rewrite"].n == 9


def test_report_json_round_trips(table1_path, embedder):
    report = run_eval(load_dataset(table1_path), [QUERY_FUSION], RuleFusionMock(), embedder)
    doc = json.loads(report.to_json())
    assert doc["aggregates"]["query_fusion"]["n"] == 10
    assert doc["metadata"]["configs"]["query_fusion"]["k"] == 1


def _score(qid, approach, cos, f1):
    return QuestionScore(qid, approach, "", "", cos, f1, f1, f1)


unit = st.floats(0.01, 1.0)


@settings(max_examples=50)
@given(st.lists(st.tuples(unit, unit), min_size=1, max_size=20), st.lists(st.tuples(unit, unit), min_size=1, max_size=20))
def test_aggregation_is_linear(left, right):
    """Mean over the union equals the size-weighted mean of the parts."""
    a = [_score(f"l{i}", "x", c, f) for i, (c, f) in enumerate(left)]
    b = [_score(f"r{i}", "x", c, f) for i, (c, f) in enumerate(right)]
    whole = aggregate(a + b, ["x"])["x"]
    pa, pb = aggregate(a, ["x"])["x"], aggregate(b, ["x"])["x"]
    n = len(a) + len(b)
    assert whole.mean_cosine == pytest.approx((pa.mean_cosine * len(a) + pb.mean_cosine * len(b)) / n, abs=1e-12)
    assert whole.mean_bert_f1 == pytest.approx((pa.mean_bert_f1 * len(a) + pb.mean_bert_f1 * len(b)) / n, abs=1e-12)


def test_per_question_gain_differs_from_aggregate_gain():
    scores = [_score("q1", "a", 0.2, 0.2), _score("q2", "a", 0.9, 0.9),
              _score("q1", "b", 0.1, 0.1), _score("q2", "b", 0.9, 0.9)]
    g = build_report("d", ["a", "b"], scores).gain("a", "b", "cosine")
    assert g.gain_pct == pytest.approx(10.0)
    assert g.mean_per_question_gain_pct == pytest.approx(50.0)
