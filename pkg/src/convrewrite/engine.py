"""The parameterised rewrite procedure and its fusion variant.

``rewrite`` builds a context window from the session, renders the prompt and
calls the model once. ``advance_fusion_session`` additionally stores the
result on a new turn, so that the next call sees it as the previous rewrite.
The engine keeps no state of its own between calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .core import (
    ConversationSession,
    Context,
    ContextItem,
    HistorySource,
    RewriteConfig,
    Turn,
    WindowBound,
    project_history_indexed,
    session_append,
)
from .errors import EmptyQuery, MissingRewrittenHistory, ProviderError, ProviderErrorKind
from .gate import GateClassifier, GateDecision, HeuristicGate, classify_needs_rewrite
from .prompts import TemplateRegistry, builtin_templates, render_prompt
from .providers.base import GenerativeModelProvider

_QUOTES = {'"': '"', "'": "'", "`": "`", "“": "”", "‘": "’"}

HistoryLike = Sequence[Union[ContextItem, tuple]]


@dataclass(frozen=True)
class RewriteOutcome:
    original_query: str
    rewritten_query: str
    was_gated: bool
    context_used: Context
    config_used: RewriteConfig
    gate_decision: Optional[GateDecision] = None
    prompt: Optional[str] = None


def build_context(
    history: HistoryLike,
    k: int,
    include_responses: bool = True,
    bound: WindowBound = WindowBound.LAST_K,
    indices: Optional[Sequence[int]] = None,
) -> Context:
    """Select the context window from a chronological history.

    ``LAST_K`` keeps the final ``min(k, t)`` items. ``ALGORITHM_LITERAL``
    keeps positions ``max(1, t - k) .. t`` (1-based, inclusive), which is up
    to ``k + 1`` items. ``indices`` label the items with their turn numbers
    and default to ``1..t``.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    t = len(history)
    if indices is None:
        indices = range(1, t + 1)
    elif len(indices) != t:
        raise ValueError("indices must match history length")
    if WindowBound(bound) is WindowBound.LAST_K:
        start = t - min(k, t)
    else:
        start = max(1, t - k) - 1 if t else 0
    items = []
    for raw in history[start:]:
        item = ContextItem(*raw)
        items.append(item if include_responses else ContextItem(item.query, None))
    return Context(tuple(items), tuple(indices[start:]))


def clean_model_output(text: str) -> str:
    """Strip surrounding whitespace and one layer of matching quotes."""
    out = text.strip()
    if len(out) >= 2 and _QUOTES.get(out[0]) == out[-1]:
        out = out[1:-1].strip()
    return out


def context_for(session: ConversationSession, config: RewriteConfig) -> Context:
    indexed = project_history_indexed(session, config.history_source)
    if config.history_source is HistorySource.REWRITTEN_QUERIES:
        missing = [t.index for t in session.turns if t.rewritten_query is None]
        if missing:
            raise MissingRewrittenHistory(missing[0])
    return build_context(
        [item for _, item in indexed],
        config.k,
        config.include_responses,
        config.window_bound,
        [i for i, _ in indexed],
    )


def rewrite(
    session: ConversationSession,
    query: str,
    config: RewriteConfig,
    model: GenerativeModelProvider,
    gate: Optional[GateClassifier] = None,
    templates: Optional[TemplateRegistry] = None,
) -> RewriteOutcome:
    """Rewrite ``query`` given the conversation so far.

    With ``config.gate_enabled`` the gate (``HeuristicGate`` unless one is
    passed) runs first; a query it judges self-contained is returned
    verbatim without calling the model.
    """
    if not query or not query.strip():
        raise EmptyQuery("query must be non-empty")
    context = context_for(session, config)

    decision = None
    if config.gate_enabled:
        decision = classify_needs_rewrite(query, context, gate or HeuristicGate())
        if not decision.needs_rewrite:
            return RewriteOutcome(query, query, True, context, config, decision)

    template = (templates or builtin_templates())[config.prompt_template_id]
    prompt = render_prompt(template, context, query)
    provider_id = getattr(getattr(model, "descriptor", None), "provider_id", type(model).__name__)
    try:
        raw = model.generate(prompt)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(ProviderErrorKind.OTHER, repr(exc), provider_id=provider_id) from exc
    if not isinstance(raw, str):
        raise ProviderError(ProviderErrorKind.MALFORMED, f"model returned {type(raw).__name__}", provider_id=provider_id, raw=raw)
    out = clean_model_output(raw)
    if not out:
        raise ProviderError(ProviderErrorKind.MALFORMED, "model returned an empty rewrite", provider_id=provider_id, raw=raw)
    return RewriteOutcome(query, out, False, context, config, decision, prompt)


def advance_session(
    session: ConversationSession,
    query: str,
    response: Optional[str],
    config: RewriteConfig,
    model: GenerativeModelProvider,
    gate: Optional[GateClassifier] = None,
    templates: Optional[TemplateRegistry] = None,
) -> tuple[ConversationSession, RewriteOutcome]:
    """Rewrite ``query`` and append it, with its rewrite, as the next turn.

    A gated turn stores the original query as its rewrite, so a fusion
    chain never breaks.
    """
    outcome = rewrite(session, query, config, model, gate, templates)
    turn = Turn(
        index=session.last_index + 1,
        user_query=query,
        response=response,
        rewritten_query=outcome.rewritten_query,
    )
    return session_append(session, turn), outcome


def advance_fusion_session(
    session: ConversationSession,
    query: str,
    response: Optional[str],
    config: RewriteConfig,
    model: GenerativeModelProvider,
    gate: Optional[GateClassifier] = None,
    templates: Optional[TemplateRegistry] = None,
) -> tuple[ConversationSession, RewriteOutcome]:
    if config.history_source is not HistorySource.REWRITTEN_QUERIES:
        raise ValueError("advance_fusion_session needs a config with history_source=REWRITTEN_QUERIES")
    return advance_session(session, query, response, config, model, gate, templates)


def replay(
    queries: Sequence[str],
    config: RewriteConfig,
    model: GenerativeModelProvider,
    *,
    responses: Optional[Sequence[Optional[str]]] = None,
    gate: Optional[GateClassifier] = None,
    session: Optional[ConversationSession] = None,
    templates: Optional[TemplateRegistry] = None,
) -> tuple[ConversationSession, list[RewriteOutcome]]:
    """Run a whole conversation through :func:`advance_session`."""
    session = session if session is not None else ConversationSession()
    outcomes = []
    for i, q in enumerate(queries):
        resp = responses[i] if responses is not None else None
        session, outcome = advance_session(session, q, resp, config, model, gate, templates)
        outcomes.append(outcome)
    return session, outcomes

