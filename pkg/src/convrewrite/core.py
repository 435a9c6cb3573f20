"""Domain values: turns, sessions, rewrite configurations, contexts, templates.

Everything here is an immutable value. "Mutating" a session means building a
new one, so sessions can be shared freely between threads.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Mapping, NamedTuple, Optional

from .errors import EmptyQuery, IndexGap


class HistorySource(str, enum.Enum):
    RAW_INPUTS = "raw_inputs"
    REWRITTEN_QUERIES = "rewritten_queries"


class WindowBound(str, enum.Enum):
    #: final ``min(k, t)`` items, as the prose and the fusion variant describe
    LAST_K = "last_k"
    #: items ``max(1, t - k) .. t`` inclusive, i.e. up to ``k + 1`` items
    ALGORITHM_LITERAL = "algorithm_literal"


def _require_text(text: Optional[str], what: str = "user_query") -> str:
    if text is None or not text.strip():
        raise EmptyQuery(f"{what} must be non-empty")
    return text


@dataclass(frozen=True)
class Turn:
    index: int
    user_query: str
    response: Optional[str] = None
    rewritten_query: Optional[str] = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"turn index must be >= 1, got {self.index}")
        _require_text(self.user_query)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"index": self.index, "user_query": self.user_query}
        if self.response is not None:
            doc["response"] = self.response
        if self.rewritten_query is not None:
            doc["rewritten_query"] = self.rewritten_query
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Turn":
        return cls(
            index=int(doc["index"]),
            user_query=doc["user_query"],
            response=doc.get("response"),
            rewritten_query=doc.get("rewritten_query"),
        )


def _now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class ConversationSession:
    """Ordered turn history of one conversation.

    ``created_at`` is informational; windowing only ever counts turns.
    """

    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    turns: tuple[Turn, ...] = ()
    created_at: datetime = field(default_factory=_now)

    def __post_init__(self) -> None:
        object.__setattr__(self, "turns", tuple(self.turns))
        for expected, turn in enumerate(self.turns, start=1):
            if turn.index != expected:
                raise IndexGap(expected, turn.index)

    def __len__(self) -> int:
        return len(self.turns)

    @property
    def last_index(self) -> int:
        return self.turns[-1].index if self.turns else 0

    @property
    def inputs(self) -> list[str]:
        return [t.user_query for t in self.turns]

    @property
    def responses(self) -> list[Optional[str]]:
        return [t.response for t in self.turns]

    @property
    def rewrites(self) -> list[Optional[str]]:
        return [t.rewritten_query for t in self.turns]

    def append(self, turn: Turn) -> "ConversationSession":
        return session_append(self, turn)

    def reset(self) -> "ConversationSession":
        """Drop all turns, keeping the session id."""
        return dataclasses.replace(self, turns=(), created_at=_now())

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at.isoformat(),
            "turns": [t.to_dict() for t in self.turns],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ConversationSession":
        kwargs: dict[str, Any] = {
            "session_id": str(doc["session_id"]),
            "turns": tuple(Turn.from_dict(t) for t in doc.get("turns", ())),
        }
        if doc.get("created_at"):
            kwargs["created_at"] = datetime.fromisoformat(doc["created_at"])
        return cls(**kwargs)

    def to_json(self, **kwargs: Any) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ConversationSession":
        return cls.from_dict(json.loads(text))


def session_append(session: ConversationSession, turn: Turn) -> ConversationSession:
    """Return a new session with ``turn`` added at the end.

    Raises ``IndexGap`` unless ``turn.index`` is exactly one past the last
    index (1 for an empty session).
    """
    expected = session.last_index + 1
    if turn.index != expected:
        raise IndexGap(expected, turn.index)
    return dataclasses.replace(session, turns=session.turns + (turn,))


class ContextItem(NamedTuple):
    query: str
    response: Optional[str] = None


def project_history(session: ConversationSession, source: HistorySource) -> list[ContextItem]:
    """View a session as the history list fed to the context builder.

    ``RAW_INPUTS`` yields one ``(user_query, response)`` per turn.
    ``REWRITTEN_QUERIES`` yields ``(rewritten_query, None)`` and skips turns
    that have not been rewritten.
    """
    return [item for _, item in project_history_indexed(session, source)]


def project_history_indexed(
    session: ConversationSession, source: HistorySource
) -> list[tuple[int, ContextItem]]:
    source = HistorySource(source)
    if source is HistorySource.RAW_INPUTS:
        return [(t.index, ContextItem(t.user_query, t.response)) for t in session.turns]
    return [
        (t.index, ContextItem(t.rewritten_query, None))
        for t in session.turns
        if t.rewritten_query is not None
    ]


@dataclass(frozen=True)
class Context:
    items: tuple[ContextItem, ...] = ()
    source_indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(ContextItem(*i) for i in self.items))
        object.__setattr__(self, "source_indices", tuple(self.source_indices))
        if len(self.items) != len(self.source_indices):
            raise ValueError("items and source_indices must have the same length")
        if any(b <= a for a, b in zip(self.source_indices, self.source_indices[1:])):
            raise ValueError("context items must be in ascending turn order")

    def __len__(self) -> int:
        return len(self.items)

    def __bool__(self) -> bool:
        return bool(self.items)

    @property
    def queries(self) -> list[str]:
        return [i.query for i in self.items]


@dataclass(frozen=True)
class RewriteConfig:
    """Parameters of the generic rewrite procedure.

    The two shipped presets are :data:`QUERY_REWRITE` (five raw turns with
    responses) and :data:`QUERY_FUSION` (the single previous rewrite).
    """

    k: int = 5
    history_source: HistorySource = HistorySource.RAW_INPUTS
    include_responses: bool = True
    prompt_template_id: str = "text-qa"
    gate_enabled: bool = False
    window_bound: WindowBound = WindowBound.LAST_K

    def __post_init__(self) -> None:
        object.__setattr__(self, "history_source", HistorySource(self.history_source))
        object.__setattr__(self, "window_bound", WindowBound(self.window_bound))
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 0:
            raise ValueError(f"k must be a non-negative integer, got {self.k!r}")
        if self.history_source is HistorySource.REWRITTEN_QUERIES and self.include_responses:
            raise ValueError("rewritten-query history carries no responses; set include_responses=False")

    @property
    def is_fusion(self) -> bool:
        return self.history_source is HistorySource.REWRITTEN_QUERIES

    @property
    def approach_id(self) -> str:
        name = "query_fusion" if self.is_fusion else "query_rewrite"
        preset_k = 1 if self.is_fusion else 5
        if self.k != preset_k:
            name += f"@k={self.k}"
        if self.window_bound is WindowBound.ALGORITHM_LITERAL:
            name += "@literal"
        if self.gate_enabled:
            name += "+gate"
        return name

    def replace(self, **changes: Any) -> "RewriteConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "history_source": self.history_source.value,
            "include_responses": self.include_responses,
            "prompt_template_id": self.prompt_template_id,
            "gate_enabled": self.gate_enabled,
            "window_bound": self.window_bound.value,
        }


QUERY_REWRITE = RewriteConfig(
    k=5,
    history_source=HistorySource.RAW_INPUTS,
    include_responses=True,
    prompt_template_id="text-qa",
)

QUERY_FUSION = RewriteConfig(
    k=1,
    history_source=HistorySource.REWRITTEN_QUERIES,
    include_responses=False,
    prompt_template_id="text-to-vis",
)

PRESETS: dict[str, RewriteConfig] = {
    "rewrite": QUERY_REWRITE,
    "fusion": QUERY_FUSION,
}


_PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @property
    def placeholders(self) -> list[str]:
        return _PLACEHOLDER.findall(self.body)

    @property
    def instructions(self) -> str:
        return str(self.metadata.get("instructions", ""))
