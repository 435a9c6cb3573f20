"""Prompt templates: loading from a manifest, rendering, and parsing back.

Templates are plain text files with ``{{context}}``, ``{{query}}`` and
``{{instructions}}`` placeholders. A manifest maps template ids to files::

    {"text-qa": {"path": "text-qa.txt", "instructions": "..."},
     "plain": "plain.txt"}

Context items are rendered in a fixed, line-oriented block format so that
offline mock models can read them back with :func:`parse_prompt`::

    [-2] User: compare monthly revenue by country
    [-2] Assistant: Here is the chart ...
    [-1] User: yearly

The label is the item's distance from the current question.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping, Optional, Union

from .core import Context, ContextItem, PromptTemplate
from .errors import EmptyQuery, UnknownPlaceholder, UnknownTemplate

KNOWN_PLACEHOLDERS = frozenset({"context", "query", "instructions"})
EMPTY_CONTEXT_TEXT = "(none)"
QUERY_MARKER = "Current question: "

_PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")
_USER_LINE = re.compile(r"^\[-(\d+)\] User: (.*)$", re.MULTILINE)
_ASSISTANT_LINE = re.compile(r"^\[-(\d+)\] Assistant: (.*)$", re.MULTILINE)


def _single_line(text: str) -> str:
    return " ".join(text.split())


def render_context(context: Context) -> str:
    if not context.items:
        return EMPTY_CONTEXT_TEXT
    n = len(context.items)
    lines = []
    for pos, item in enumerate(context.items):
        label = f"[-{n - pos}]"
        lines.append(f"{label} User: {_single_line(item.query)}")
        if item.response is not None:
            lines.append(f"{label} Assistant: {_single_line(item.response)}")
    return "\n".join(lines)


def render_prompt(template: PromptTemplate, context: Context, query: str) -> str:
    """Fill ``template`` with the rendered context block and the query.

    Pure function of its arguments. Raises ``UnknownPlaceholder`` for any
    placeholder outside ``{{context}}``, ``{{query}}``, ``{{instructions}}``.
    """
    if not query or not query.strip():
        raise EmptyQuery("query must be non-empty")
    used = set(_PLACEHOLDER.findall(template.body))
    unknown = sorted(used - KNOWN_PLACEHOLDERS)
    if unknown:
        raise UnknownPlaceholder(unknown, template.template_id)
    values = {
        "context": render_context(context),
        "query": _single_line(query),
        "instructions": template.instructions,
    }
    body = template.body
    # the query always goes last, even for templates that forgot it
    if "context" not in used:
        body = body.rstrip() + "\n\n{{context}}"
    if "query" not in used:
        body = body.rstrip() + "\n\n" + QUERY_MARKER + "{{query}}"
    text = _PLACEHOLDER.sub(lambda m: values[m.group(1)], body)
    return text.strip() + "\n"


@dataclass(frozen=True)
class ParsedPrompt:
    context: tuple[ContextItem, ...]
    query: str


def parse_prompt(prompt: str) -> ParsedPrompt:
    """Recover the context items and current query from a rendered prompt.

    Only understands prompts produced by :func:`render_prompt` with a
    template that puts the query on a ``Current question:`` line; falls back
    to the last non-empty line otherwise.
    """
    users = {int(m.group(1)): m.group(2) for m in _USER_LINE.finditer(prompt)}
    answers = {int(m.group(1)): m.group(2) for m in _ASSISTANT_LINE.finditer(prompt)}
    items = tuple(ContextItem(users[d], answers.get(d)) for d in sorted(users, reverse=True))
    query = ""
    for line in reversed(prompt.splitlines()):
        if line.startswith(QUERY_MARKER):
            query = line[len(QUERY_MARKER):]
            break
    else:
        rest = [ln for ln in prompt.splitlines() if ln.strip()]
        query = rest[-1] if rest else ""
    return ParsedPrompt(items, query.strip())


class TemplateRegistry(Mapping[str, PromptTemplate]):
    def __init__(self, templates: Optional[Mapping[str, PromptTemplate]] = None) -> None:
        self._templates = dict(templates or {})

    def __getitem__(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplate(template_id) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._templates)

    def __len__(self) -> int:
        return len(self._templates)

    def add(self, template: PromptTemplate) -> None:
        self._templates[template.template_id] = template

    @classmethod
    def from_manifest(cls, path: Union[str, Path]) -> "TemplateRegistry":
        path = Path(path)
        manifest = json.loads(path.read_text(encoding="utf-8"))
        return cls._build(manifest, lambda rel: (path.parent / rel).read_text(encoding="utf-8"))

    @classmethod
    def builtin(cls) -> "TemplateRegistry":
        root = resources.files("convrewrite") / "templates"
        manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
        return cls._build(manifest, lambda rel: (root / rel).read_text(encoding="utf-8"))

    @classmethod
    def _build(cls, manifest, read) -> "TemplateRegistry":
        templates = {}
        for template_id, entry in manifest.items():
            if isinstance(entry, str):
                entry = {"path": entry}
            meta = {k: v for k, v in entry.items() if k != "path"}
            templates[template_id] = PromptTemplate(template_id, read(entry["path"]), meta)
        return cls(templates)


_builtin: Optional[TemplateRegistry] = None


def builtin_templates() -> TemplateRegistry:
    global _builtin
    if _builtin is None:
        _builtin = TemplateRegistry.builtin()
    return _builtin
