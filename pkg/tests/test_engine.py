import pytest
from hypothesis import given
from hypothesis import strategies as st

from convrewrite import (
    QUERY_FUSION,
    QUERY_REWRITE,
    ConversationSession,
    FixedGate,
    IdentityMock,
    MissingRewrittenHistory,
    PromptTemplate,
    ProviderError,
    ProviderErrorKind,
    RuleFusionMock,
    ScriptedMock,
    Turn,
    UnknownPlaceholder,
    advance_fusion_session,
    build_context,
    render_prompt,
    replay,
    rewrite,
)
from convrewrite.core import Context, WindowBound
from convrewrite.engine import clean_model_output
from convrewrite.fixtures import TABLE1_INPUTS, TABLE1_REWRITES, table1_scripted_mock
from convrewrite.gate import RationaleTag
from convrewrite.prompts import builtin_templates, parse_prompt
from convrewrite.providers import FailingMock

HISTORY10 = [(f"q{i}", f"a{i}") for i in range(1, 11)]


def test_last_k_window():
    ctx = build_context(HISTORY10, 5, bound=WindowBound.LAST_K)
    assert ctx.queries == ["q6", "q7", "q8", "q9", "q10"]
    assert ctx.source_indices == (6, 7, 8, 9, 10)


def test_algorithm_literal_window():
    ctx = build_context(HISTORY10, 5, bound=WindowBound.ALGORITHM_LITERAL)
    assert ctx.queries == ["q5", "q6", "q7", "q8", "q9", "q10"]


@pytest.mark.parametrize("bound", list(WindowBound))
def test_window_larger_than_history(bound):
    assert build_context(HISTORY10[:2], 5, bound=bound).queries == ["q1", "q2"]


def test_zero_window():
    assert build_context(HISTORY10, 0).items == ()


def test_responses_dropped_on_request():
    ctx = build_context(HISTORY10, 2, include_responses=False)
    assert all(item.response is None for item in ctx.items)
    assert build_context(HISTORY10, 2).items[-1].response == "a10"


def test_negative_k():
    with pytest.raises(ValueError):
        build_context(HISTORY10, -1)


def _tpl(body):
    return PromptTemplate("t", body, {"instructions": "Rewrite it."})


def test_render_empty_context():
    text = render_prompt(_tpl("{{instructions}}\n{{context}}\nCurrent question: {{query}}"), Context(), "q")
    assert "q" in text
    assert "User:" not in text
    assert parse_prompt(text).context == ()


def test_render_orders_items_and_puts_query_last():
    ctx = build_context([("first", "r1"), ("second", None)], 5)
    text = render_prompt(_tpl("{{instructions}}\n{{context}}\nCurrent question: {{query}}"), ctx, "now what")
    assert text.index("first") < text.index("r1") < text.index("second") < text.index("now what")
    assert "[-2] User: first" in text and "[-1] User: second" in text
    assert text.rstrip().endswith("now what")
    assert "Rewrite it." in text


def test_render_unknown_placeholder():
    with pytest.raises(UnknownPlaceholder) as exc:
        render_prompt(_tpl("{{context}} {{bogus}} {{query}}"), Context(), "q")
    assert "bogus" in str(exc.value)


def test_render_appends_missing_query():
    text = render_prompt(_tpl("Just rewrite."), Context(), "hello")
    assert parse_prompt(text).query == "hello"


def test_render_is_pure():
    ctx = build_context(HISTORY10, 3)
    tpl = builtin_templates()["text-qa"]
    assert render_prompt(tpl, ctx, "x") == render_prompt(tpl, ctx, "x")


def test_builtin_templates_shipped():
    reg = builtin_templates()
    assert {"text-qa", "text-to-vis"} <= set(reg)
    assert reg["text-to-vis"].metadata["task"] == "text_to_vis"


def test_rewrite_identity_empty_history():
    out = rewrite(ConversationSession(), "compare monthly revenue by country", QUERY_REWRITE, IdentityMock())
    assert out.rewritten_query == "compare monthly revenue by country"
    assert out.was_gated is False
    assert len(out.context_used) == 0


def test_rewrite_table1_row3():
    s = ConversationSession("t", (
        Turn(1, "compare monthly revenue by country", rewritten_query="compare monthly revenue by country"),
        Turn(2, "yearly", rewritten_query="compare yearly revenue by country"),
    ))
    out = rewrite(s, "show it as a line chart", QUERY_FUSION, RuleFusionMock())
    assert out.rewritten_query == "compare yearly revenue by country as line chart"


def test_gated_query_passes_through():
    cfg = QUERY_REWRITE.replace(gate_enabled=True)
    model = ScriptedMock([], strict=True)  # would raise if called
    out = rewrite(ConversationSession(), "what is streaming segmentation", cfg, model,
                  gate=FixedGate(False, RationaleTag.SELF_CONTAINED))
    assert out.was_gated is True
    assert out.rewritten_query == "what is streaming segmentation"


def test_gate_does_not_fire_when_rewrite_needed():
    s = ConversationSession("s", (Turn(1, "what is streaming segmentation", "It is ..."),))
    cfg = QUERY_REWRITE.replace(gate_enabled=True)
    model = ScriptedMock([("how does it differ", "how does streaming segmentation differ from batch segmentation?")])
    out = rewrite(s, "how does it differ from batch segmentation?", cfg, model)
    assert out.was_gated is False
    assert out.gate_decision.rationale_tag is RationaleTag.PRONOUN_REFERENCE
    assert out.rewritten_query == "how does streaming segmentation differ from batch segmentation?"


def test_fusion_table1_trace_with_both_mocks():
    for model in (RuleFusionMock(), table1_scripted_mock()):
        session = ConversationSession()
        for q, expected in zip(TABLE1_INPUTS, TABLE1_REWRITES):
            session, out = advance_fusion_session(session, q, None, QUERY_FUSION, model)
            assert out.rewritten_query == expected
        assert session.rewrites == list(TABLE1_REWRITES)


def test_fusion_single_turn():
    session, out = advance_fusion_session(ConversationSession(), "compare orders by country", None, QUERY_FUSION, IdentityMock())
    assert session.turns[0].rewritten_query == out.rewritten_query == "compare orders by country"
    assert out.context_used.items == ()


def test_fusion_turn10():
    s = ConversationSession("s", (
        Turn(1, "show only this month", rewritten_query="compare this month pageviews by top-5 marketing channels as bar"),
    ))
    _, out = advance_fusion_session(s, "add revenue", None, QUERY_FUSION, RuleFusionMock())
    assert out.rewritten_query == "compare this month pageviews and revenue by top-5 marketing channels as bar"


def test_fusion_requires_fusion_config():
    with pytest.raises(ValueError):
        advance_fusion_session(ConversationSession(), "q", None, QUERY_REWRITE, IdentityMock())


def test_missing_rewritten_history():
    s = ConversationSession("s", (Turn(1, "a", rewritten_query="A"), Turn(2, "b")))
    with pytest.raises(MissingRewrittenHistory) as exc:
        rewrite(s, "c", QUERY_FUSION, IdentityMock())
    assert exc.value.turn_index == 2


def test_provider_error_propagates():
    err = ProviderError(ProviderErrorKind.TIMEOUT, "slow", provider_id="x")
    with pytest.raises(ProviderError) as exc:
        rewrite(ConversationSession(), "q", QUERY_REWRITE, FailingMock(err))
    assert exc.value is err


def test_foreign_exception_wrapped():
    with pytest.raises(ProviderError) as exc:
        rewrite(ConversationSession(), "q", QUERY_REWRITE, FailingMock(RuntimeError("boom")))
    assert "boom" in str(exc.value)


@pytest.mark.parametrize(
    "raw, clean",
    [("  hi  ", "hi"), ('"hi there"', "hi there"), ("'x'", "x"), ("“q”", "q"), ('"unbalanced', '"unbalanced'),
     ("a \"b\" c", "a \"b\" c")],
)
def test_clean_model_output(raw, clean):
    assert clean_model_output(raw) == clean


def test_fusion_locality_in_prompt():
    _, outcomes = replay(TABLE1_INPUTS, QUERY_FUSION, RuleFusionMock())
    for t, out in enumerate(outcomes):
        parsed = parse_prompt(out.prompt)
        assert parsed.query == TABLE1_INPUTS[t]
        if t == 0:
            assert parsed.context == ()
        else:
            assert [i.query for i in parsed.context] == [TABLE1_REWRITES[t - 1]]
            assert all(i.response is None for i in parsed.context)
            # raw inputs of earlier turns never reach the model
            for raw in TABLE1_INPUTS[1:t]:
                assert f"User: {raw}\n" not in out.prompt


def test_preset_recovery():
    responses = [f"answer {i}" for i in range(10)]
    _, outs = replay(TABLE1_INPUTS, QUERY_REWRITE, IdentityMock(), responses=responses)
    assert [len(o.context_used) for o in outs] == [min(5, t) for t in range(10)]
    assert all(i.response is not None for i in outs[-1].context_used.items)
    _, outs = replay(TABLE1_INPUTS, QUERY_FUSION, RuleFusionMock())
    assert max(len(o.context_used) for o in outs) == 1


@given(st.lists(st.text(min_size=1, max_size=20).filter(str.strip), min_size=1, max_size=6), st.integers(0, 6))
def test_rewrite_deterministic(queries, k):
    cfg = QUERY_REWRITE.replace(k=k)
    a = replay(queries, cfg, RuleFusionMock())[1]
    b = replay(queries, cfg, RuleFusionMock())[1]
    assert [o.rewritten_query for o in a] == [o.rewritten_query for o in b]
    assert [o.prompt for o in a] == [o.prompt for o in b]


@given(st.integers(0, 30), st.integers(0, 10))
def test_window_property_on_sessions(t, k):
    turns = tuple(Turn(i, f"q{i}", rewritten_query=f"r{i}") for i in range(1, t + 1))
    session = ConversationSession("s", turns)
    out = rewrite(session, "next", QUERY_REWRITE.replace(k=k), IdentityMock())
    idx = out.context_used.source_indices
    assert list(idx) == sorted(idx)
    assert all(i > t - k for i in idx)
