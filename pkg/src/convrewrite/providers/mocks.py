"""Offline model providers. All of them are deterministic and immutable."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from ..errors import NoScriptMatch
from ..prompts import parse_prompt
from .base import ProviderDescriptor
from .grammar import DEFAULT_METRICS, EditGrammar

Matcher = Union[str, Sequence[str]]


class IdentityMock:
    """Returns the current question untouched."""

    descriptor = ProviderDescriptor("mock-identity", "identity", deterministic=True)

    def generate(self, prompt: str) -> str:
        return parse_prompt(prompt).query


@dataclass(frozen=True)
class ScriptEntry:
    matcher: tuple[str, ...]
    response: str

    def fires(self, prompt: str) -> bool:
        return all(s in prompt for s in self.matcher)


class ScriptedMock:
    """Canned responses keyed on substrings of the rendered prompt.

    A matcher is a string or a sequence of strings that must all occur in
    the prompt. The first entry that fires wins. With ``strict=True`` an
    unmatched prompt raises :class:`NoScriptMatch`; otherwise ``default``
    (or the current question) is returned.
    """

    def __init__(
        self,
        script: Iterable[tuple[Matcher, str]],
        *,
        strict: bool = True,
        default: Optional[str] = None,
        name: str = "scripted",
    ) -> None:
        entries = []
        for matcher, response in script:
            parts = (matcher,) if isinstance(matcher, str) else tuple(matcher)
            entries.append(ScriptEntry(parts, response))
        self.script: tuple[ScriptEntry, ...] = tuple(entries)
        self.strict = strict
        self.default = default
        self.descriptor = ProviderDescriptor(f"mock-{name}", name, deterministic=True)

    def generate(self, prompt: str) -> str:
        for entry in self.script:
            if entry.fires(prompt):
                return entry.response
        if self.strict:
            raise NoScriptMatch(prompt, self.descriptor.provider_id)
        return self.default if self.default is not None else parse_prompt(prompt).query


class RuleFusionMock:
    """Stands in for an LLM on analytics conversations.

    Reads the context items and current question back out of the prompt and
    folds them oldest-first through the edit grammar. With the fusion preset
    the context is the single previous rewrite, so this is one
    ``rule_fuse(previous_rewrite, question)``; with a raw-history window it
    reconstructs the question from whatever turns the window kept.
    """

    def __init__(self, metrics: Iterable[str] = DEFAULT_METRICS) -> None:
        self.grammar = EditGrammar(metrics)
        self.descriptor = ProviderDescriptor("mock-rule-fusion", "rule-fusion", deterministic=True)

    def generate(self, prompt: str) -> str:
        parsed = parse_prompt(prompt)
        acc: Optional[str] = None
        for item in parsed.context:
            acc = item.query if acc is None else self.grammar.fuse(acc, item.query)
        if acc is None:
            return parsed.query
        return self.grammar.fuse(acc, parsed.query)


class FailingMock:
    """Raises the given error on every call; for exercising error paths."""

    def __init__(self, error: Exception) -> None:
        self.error = error
        self.descriptor = ProviderDescriptor("mock-failing", "failing", deterministic=True)

    def generate(self, prompt: str) -> str:
        raise self.error
