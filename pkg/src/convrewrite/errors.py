"""Exception hierarchy shared across the package."""

from __future__ import annotations

import enum
from typing import Any, Iterable, Sequence


class ConvRewriteError(Exception):
    """Base class for all package errors."""


class IndexGap(ConvRewriteError, ValueError):
    """Raised when a turn index does not follow the previous one."""

    def __init__(self, expected: int, got: int) -> None:
        super().__init__(f"expected turn index {expected}, got {got}")
        self.expected = expected
        self.got = got


class EmptyQuery(ConvRewriteError, ValueError):
    """Raised when a query is empty or whitespace-only."""


class UnknownPlaceholder(ConvRewriteError, KeyError):
    def __init__(self, names: Sequence[str], template_id: str = "") -> None:
        self.names = tuple(names)
        self.template_id = template_id
        super().__init__(f"template {template_id!r} uses unknown placeholder(s): {', '.join(self.names)}")

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return self.args[0]


class UnknownTemplate(ConvRewriteError, KeyError):
    def __str__(self) -> str:
        return f"unknown prompt template {self.args[0]!r}"


class MissingRewrittenHistory(ConvRewriteError):
    """Raised in fusion mode when a prior turn carries no rewritten query."""

    def __init__(self, turn_index: int) -> None:
        super().__init__(f"turn {turn_index} has no rewritten_query; fusion needs the full chain")
        self.turn_index = turn_index


class ProviderErrorKind(str, enum.Enum):
    TIMEOUT = "timeout"
    AUTH = "auth"
    RATE_LIMITED = "rate_limited"
    MALFORMED = "malformed"
    SERVER = "server"
    TRANSPORT = "transport"
    UNSCRIPTED = "unscripted"
    OTHER = "other"


class ProviderError(ConvRewriteError):
    """A model or embedding call failed.

    ``raw`` keeps the unparsed response body when one was received.
    """

    def __init__(
        self,
        kind: ProviderErrorKind,
        detail: str,
        *,
        provider_id: str = "",
        status: int | None = None,
        raw: Any = None,
    ) -> None:
        self.kind = ProviderErrorKind(kind)
        self.detail = detail
        self.provider_id = provider_id
        self.status = status
        self.raw = raw
        prefix = f"[{provider_id}] " if provider_id else ""
        super().__init__(f"{prefix}{self.kind.value}: {detail}")


class NoScriptMatch(ProviderError):
    def __init__(self, prompt: str, provider_id: str = "scripted") -> None:
        super().__init__(
            ProviderErrorKind.UNSCRIPTED,
            "no scripted matcher fired for prompt",
            provider_id=provider_id,
            raw=prompt,
        )


class DimensionMismatch(ConvRewriteError, ValueError):
    def __init__(self, a: int, b: int) -> None:
        super().__init__(f"vector dimensions differ: {a} != {b}")


class NonPositiveBaseline(ConvRewriteError, ValueError):
    def __init__(self, baseline: float) -> None:
        super().__init__(f"relative gain needs a positive baseline, got {baseline!r}")
        self.baseline = baseline


class ParseError(ConvRewriteError, ValueError):
    def __init__(self, path: Any, line: int | None, message: str) -> None:
        loc = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{loc}: {message}")
        self.path = path
        self.line = line


class ValidationError(ConvRewriteError, ValueError):
    """One or more validation problems, reported together.

    ``issues`` is a list of ``(location, message)`` pairs.
    """

    def __init__(self, issues: Iterable[tuple[str, str]], summary: str = "validation failed") -> None:
        self.issues = list(issues)
        lines = [summary] + [f"  {loc}: {msg}" for loc, msg in self.issues]
        super().__init__("\n".join(lines))


class SchemaError(ValidationError):
    def __init__(self, issues: Iterable[tuple[str, str]]) -> None:
        super().__init__(issues, summary="dataset schema violations")
