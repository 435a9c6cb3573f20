import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convrewrite import (
    ParseError,
    SchemaError,
    SyntheticProfile,
    TaskType,
    compute_stats,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from convrewrite.datasets import (
    Conversation,
    AnnotatedQuestion,
    Dataset,
    DeclaredStats,
    dataset_lines,
    grammar_reachable,
    manifest_path_for,
    validate_dataset,
)


def brute_force_counts(jsonl_text):
    """Count questions straight from the raw records."""
    total = with_history = 0
    lengths = []
    for line in jsonl_text.splitlines():
        if not line.strip():
            continue
        qs = json.loads(line)["questions"]
        lengths.append(len(qs))
        for q in qs:
            total += 1
            if q["turn_index"] > 1:
                with_history += 1
    return total, with_history, lengths


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def test_load_table1(table1_path):
    ds = load_dataset(table1_path)
    stats = compute_stats(ds)
    assert ds.task_type is TaskType.TEXT_TO_VIS
    assert (stats.n_conversations, stats.n_questions, stats.n_with_history) == (1, 10, 9)
    assert stats.chat_length_range == (10, 10)
    assert stats.n_distinct_intents == 8
    assert ds.validated


def test_load_via_manifest(table1_path):
    jsonl = table1_path.with_name("table1.jsonl")
    assert manifest_path_for(jsonl) == table1_path
    assert load_dataset(jsonl) == load_dataset(table1_path)


def test_turn_gap_names_conversation(tmp_path):
    path = write_jsonl(tmp_path / "bad.jsonl", [
        {"conversation_id": "ok", "questions": [{"turn_index": 1, "user_query": "a"}]},
        {"conversation_id": "c7", "questions": [
            {"turn_index": 1, "user_query": "a"}, {"turn_index": 3, "user_query": "b"}]},
    ])
    with pytest.raises(SchemaError) as exc:
        load_dataset(path)
    assert any("c7" in loc and "gap" in msg for loc, msg in exc.value.issues)


def test_all_issues_collected(tmp_path):
    path = write_jsonl(tmp_path / "bad.jsonl", [
        {"conversation_id": "a", "questions": [{"turn_index": 1, "user_query": ""}]},
        {"conversation_id": "b", "questions": [{"turn_index": 2, "user_query": "x"}], "extra": 1},
    ])
    with pytest.raises(SchemaError) as exc:
        load_dataset(path)
    assert len(exc.value.issues) == 3


def test_empty_file_is_valid(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    ds = load_dataset(path)
    assert ds.conversations == () and compute_stats(ds).n_questions == 0


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text('{"conversation_id": "a", "questions": []}\n{not json\n')
    with pytest.raises(ParseError) as exc:
        load_dataset(path)
    assert exc.value.line == 2


def test_declared_stats_mismatch(tmp_path):
    ds = Dataset("d", TaskType.TEXT_QA, (
        Conversation("c", (AnnotatedQuestion(1, "q1"), AnnotatedQuestion(2, "q2"))),
    ), DeclaredStats(n_questions=3, n_with_history=1, chat_length_range=(2, 5)))
    with pytest.raises(SchemaError) as exc:
        validate_dataset(ds)
    assert [loc for loc, _ in exc.value.issues] == ["declared_stats"]


def test_round_trip(tmp_path):
    ds = generate_synthetic(SyntheticProfile(TaskType.TEXT_TO_VIS, 4, (2, 6), seed=3))
    save_dataset(ds, tmp_path / "rt.jsonl")
    assert load_dataset(tmp_path / "rt.jsonl") == ds


def test_generator_deterministic(tmp_path):
    profile = SyntheticProfile(TaskType.TEXT_TO_VIS, 6, (2, 8), seed=11)
    save_dataset(generate_synthetic(profile), tmp_path / "a.jsonl")
    save_dataset(generate_synthetic(profile), tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    other = generate_synthetic(SyntheticProfile(TaskType.TEXT_TO_VIS, 6, (2, 8), seed=12))
    assert dataset_lines(other) != dataset_lines(generate_synthetic(profile))


def test_generator_fixed_length():
    stats = compute_stats(generate_synthetic(SyntheticProfile(TaskType.TEXT_TO_VIS, 5, (10, 10), seed=0)))
    assert (stats.n_questions, stats.n_with_history) == (50, 45)


def test_generator_explicit_lengths():
    ds = generate_synthetic(SyntheticProfile(TaskType.TEXT_QA, 4, lengths=(5, 5, 5, 3), seed=1))
    stats = compute_stats(ds)
    assert (stats.n_questions, stats.n_with_history) == (18, 14)
    assert stats.n_distinct_intents <= 3


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_vis_golds_reachable_by_grammar(seed, n):
    ds = generate_synthetic(SyntheticProfile(TaskType.TEXT_TO_VIS, n, (2, 10), seed=seed))
    assert all(grammar_reachable(c) for c in ds.conversations)
    for conv in ds.conversations:
        golds = [q.gold_rewrite for q in conv.questions]
        assert all(a != b for a, b in zip(golds, golds[1:]))


def test_table1_reachable(table1_path):
    assert grammar_reachable(load_dataset(table1_path).conversations[0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stats_match_brute_force(seed):
    rng = random.Random(seed)
    lengths = tuple(rng.randint(1, 12) for _ in range(rng.randint(0, 8)))
    ds = generate_synthetic(SyntheticProfile(rng.choice(list(TaskType)), len(lengths), lengths=lengths, seed=seed))
    stats = compute_stats(ds)
    total, with_history, got_lengths = brute_force_counts("\n".join(dataset_lines(ds)))
    assert (stats.n_questions, stats.n_with_history) == (total, with_history)
    assert list(got_lengths) == list(lengths)


def test_stats_table_has_no_trailing_space(table1_path):
    text = compute_stats(load_dataset(table1_path)).format_table("table1")
    assert all(line == line.rstrip() for line in text.splitlines())
