"""Needs-rewrite gate: decide whether a query depends on earlier turns."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol

from .core import Context
from .errors import ProviderError, ProviderErrorKind
from .prompts import render_context
from .providers.base import GenerativeModelProvider


class RationaleTag(str, enum.Enum):
    PRONOUN_REFERENCE = "pronoun_reference"
    ELLIPTICAL = "elliptical"
    SELF_CONTAINED = "self_contained"
    MODEL_JUDGED = "model_judged"
    EMPTY_HISTORY = "empty_history"


@dataclass(frozen=True)
class GateDecision:
    needs_rewrite: bool
    confidence: float
    rationale_tag: RationaleTag

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.rationale_tag is RationaleTag.EMPTY_HISTORY and self.needs_rewrite:
            raise ValueError("an empty history never needs a rewrite")


EMPTY_HISTORY_DECISION = GateDecision(False, 1.0, RationaleTag.EMPTY_HISTORY)


class GateClassifier(Protocol):
    def classify(self, query: str, context: Context) -> GateDecision: ...


DEFAULT_PRONOUNS = ("it", "that", "this", "them", "they", "those", "these", "its", "their")
DEFAULT_FRAGMENT_CUES = ("what about", "how about", "and what about", "same for", "what if", "and for")
DEFAULT_LEADING_VERBS = (
    "add", "remove", "drop", "replace", "change", "switch", "swap", "make", "filter",
    "sort", "exclude", "include", "use", "show only", "only", "now", "also", "instead",
)


class HeuristicGate:
    """Cue-lexicon classifier, fully offline and deterministic.

    A query needs rewriting when it contains a pronoun, opens with a
    fragment cue (``"what about"``) or a bare edit verb (``"add revenue"``),
    or has fewer than ``min_tokens`` tokens. Everything else is
    self-contained.
    """

    def __init__(
        self,
        pronouns: Iterable[str] = DEFAULT_PRONOUNS,
        fragment_cues: Iterable[str] = DEFAULT_FRAGMENT_CUES,
        leading_verbs: Iterable[str] = DEFAULT_LEADING_VERBS,
        min_tokens: int = 3,
    ) -> None:
        self.pronouns = tuple(pronouns)
        self.fragment_cues = tuple(fragment_cues)
        self.leading_verbs = tuple(leading_verbs)
        self.min_tokens = min_tokens
        self._pronoun_re = _word_alternation(self.pronouns)
        self._fragment_re = _word_alternation(self.fragment_cues, anchored=True)
        self._verb_re = _word_alternation(self.leading_verbs, anchored=True)

    def classify(self, query: str, context: Context) -> GateDecision:
        if not context.items:
            return EMPTY_HISTORY_DECISION
        text = " ".join(query.lower().split())
        if self._pronoun_re and self._pronoun_re.search(text):
            return GateDecision(True, 0.9, RationaleTag.PRONOUN_REFERENCE)
        if self._fragment_re and self._fragment_re.search(text):
            return GateDecision(True, 0.9, RationaleTag.ELLIPTICAL)
        if self._verb_re and self._verb_re.search(text):
            return GateDecision(True, 0.8, RationaleTag.ELLIPTICAL)
        if len(re.findall(r"[^\W_]+", text)) < self.min_tokens:
            return GateDecision(True, 0.6, RationaleTag.ELLIPTICAL)
        return GateDecision(False, 0.7, RationaleTag.SELF_CONTAINED)


def _word_alternation(words: Iterable[str], anchored: bool = False) -> Optional["re.Pattern[str]"]:
    words = sorted({w.lower() for w in words if w}, key=len, reverse=True)
    if not words:
        return None
    body = "|".join(re.escape(w) for w in words)
    return re.compile((r"^(?:" if anchored else r"\b(?:") + body + r")\b")


class FixedGate:
    """Always returns the same decision (for tests and ablations)."""

    def __init__(self, needs_rewrite: bool, tag: RationaleTag = RationaleTag.SELF_CONTAINED, confidence: float = 1.0) -> None:
        self.decision = GateDecision(needs_rewrite, confidence, tag)

    def classify(self, query: str, context: Context) -> GateDecision:
        return self.decision


MODEL_GATE_PROMPT = """Decide whether the user's latest question can be understood on its own,
or whether it refers back to the earlier conversation and must be rewritten.
Answer with a single word: YES if it needs rewriting, NO if it is self-contained.

Conversation so far (oldest first):
{context}

Current question: {query}
"""


class ModelGate:
    """Asks a generative model for a YES/NO judgement."""

    def __init__(self, model: GenerativeModelProvider, prompt: str = MODEL_GATE_PROMPT) -> None:
        self.model = model
        self.prompt = prompt

    def classify(self, query: str, context: Context) -> GateDecision:
        if not context.items:
            return EMPTY_HISTORY_DECISION
        answer = self.model.generate(self.prompt.format(context=render_context(context), query=query))
        word = answer.strip().strip(".!\"'").split()[:1]
        verdict = word[0].lower() if word else ""
        if verdict in ("yes", "true"):
            return GateDecision(True, 1.0, RationaleTag.MODEL_JUDGED)
        if verdict in ("no", "false"):
            return GateDecision(False, 1.0, RationaleTag.MODEL_JUDGED)
        raise ProviderError(
            ProviderErrorKind.MALFORMED,
            f"gate model answered {answer!r}, expected YES or NO",
            provider_id=self.model.descriptor.provider_id,
            raw=answer,
        )


def classify_needs_rewrite(query: str, context: Context, classifier: GateClassifier) -> GateDecision:
    """Run ``classifier``, short-circuiting to ``EMPTY_HISTORY`` when there is no context."""
    if not context.items:
        return EMPTY_HISTORY_DECISION
    return classifier.classify(query, context)
