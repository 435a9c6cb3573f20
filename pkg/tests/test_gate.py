import pytest
from hypothesis import given
from hypothesis import strategies as st

from convrewrite import (
    QUERY_FUSION,
    QUERY_REWRITE,
    ConversationSession,
    FixedGate,
    HeuristicGate,
    ProviderError,
    ScriptedMock,
    Turn,
    build_context,
    classify_needs_rewrite,
    rewrite,
)
from convrewrite.core import Context
from convrewrite.gate import EMPTY_HISTORY_DECISION, GateDecision, ModelGate, RationaleTag

CTX = build_context([("compare monthly revenue by country", None)], 5)


def test_fragment_needs_rewrite():
    d = HeuristicGate().classify("what about top-5", CTX)
    assert d.needs_rewrite and d.rationale_tag is RationaleTag.ELLIPTICAL


@pytest.mark.parametrize("query", ["what about top-5", "anything at all", "show it as a bar"])
def test_empty_context_never_rewrites(query):
    d = classify_needs_rewrite(query, Context(), HeuristicGate())
    assert d == EMPTY_HISTORY_DECISION
    assert not d.needs_rewrite and d.rationale_tag is RationaleTag.EMPTY_HISTORY


def test_self_contained_question():
    d = HeuristicGate().classify("compare monthly revenue by country", CTX)
    assert not d.needs_rewrite and d.rationale_tag is RationaleTag.SELF_CONTAINED


@pytest.mark.parametrize(
    "query, tag",
    [
        ("show it as a line chart", RationaleTag.PRONOUN_REFERENCE),
        ("add revenue", RationaleTag.ELLIPTICAL),
        ("yearly", RationaleTag.ELLIPTICAL),
        ("how does that compare with batch loads", RationaleTag.PRONOUN_REFERENCE),
    ],
)
def test_table1_style_followups(query, tag):
    d = HeuristicGate().classify(query, CTX)
    assert d.needs_rewrite and d.rationale_tag is tag


def test_decision_validation():
    with pytest.raises(ValueError):
        GateDecision(True, 1.5, RationaleTag.ELLIPTICAL)
    with pytest.raises(ValueError):
        GateDecision(True, 1.0, RationaleTag.EMPTY_HISTORY)


def test_model_gate_parses_answers():
    yes = ModelGate(ScriptedMock([("Current question", "Yes.")]))
    no = ModelGate(ScriptedMock([("Current question", "NO")]))
    assert yes.classify("q", CTX).needs_rewrite
    assert not no.classify("q", CTX).needs_rewrite
    assert no.classify("q", Context()) == EMPTY_HISTORY_DECISION


def test_model_gate_rejects_garbage():
    gate = ModelGate(ScriptedMock([("Current question", "perhaps")]))
    with pytest.raises(ProviderError) as exc:
        gate.classify("q", CTX)
    assert exc.value.raw == "perhaps"


queries = st.text(min_size=1, max_size=40).filter(str.strip)


@given(queries, st.integers(0, 4))
def test_gated_turns_return_query_verbatim(query, n_history):
    turns = tuple(Turn(i, f"earlier question {i}", rewritten_query=f"earlier question {i}") for i in range(1, n_history + 1))
    session = ConversationSession("s", turns)
    strict = ScriptedMock([], strict=True)
    for cfg in (QUERY_REWRITE, QUERY_FUSION):
        out = rewrite(session, query, cfg.replace(gate_enabled=True), strict, gate=FixedGate(False))
        assert out.was_gated and out.rewritten_query == query
