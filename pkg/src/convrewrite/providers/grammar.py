"""A small edit grammar over analytics questions.

An analytics question is read into a :class:`Frame`::

    compare  month over month  pageviews and revenue  by top-5 marketing channels  as bar
    <verb>   <time>            <metrics>                 <top-k> <dimension>          <chart>

A follow-up such as ``"what about top-5"`` or ``"replace with pageviews"`` is
parsed into a list of :class:`Edit` values and applied to the frame.
:func:`rule_fuse` ties the two together and is what the rule-based mock model
uses in place of a language model.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

_UNIT = r"(?:day|week|month|quarter|year)"
GRANULARITY_PATTERN = (
    rf"(?:hourly|daily|weekly|monthly|quarterly|yearly|annually|annual|{_UNIT} over {_UNIT})"
)
TIME_FILTER_PATTERN = (
    rf"(?:(?:this|last|previous|current|next) {_UNIT}"
    rf"|(?:last|past|previous) \d+ {_UNIT}s"
    r"|year to date|month to date|ytd|mtd|today|yesterday)"
)
TIME_PATTERN = rf"(?:{TIME_FILTER_PATTERN}|{GRANULARITY_PATTERN})"

CHART_PATTERN = (
    r"(?:(?:stacked |grouped |horizontal |vertical )?"
    r"(?:bar|line|pie|donut|scatter|area|column)(?: chart| graph| plot)?"
    r"|heat ?map|histogram|treemap|funnel|table)"
)

DEFAULT_METRICS = (
    "revenue", "pageviews", "page views", "orders", "sales", "visits", "visitors",
    "sessions", "users", "active users", "conversions", "conversion rate", "bounce rate",
    "clicks", "impressions", "signups", "profit", "cost", "spend", "downloads",
    "purchases", "units sold", "average order value", "churn", "installs",
)

ANALYSIS_VERBS = frozenset(
    {"compare", "show", "plot", "graph", "chart", "visualize", "display", "list", "trend"}
)

FILLER_WORDS = frozenset(
    {
        "now", "what", "about", "how", "show", "only", "just", "me", "it", "that", "this",
        "them", "those", "these", "please", "can", "you", "and", "also", "then", "ok",
        "okay", "make", "the", "a", "an", "display", "give", "lets", "let's", "let", "us",
        "see", "so", "instead", "same", "but", "for", "of", "try", "view",
    }
)

_FLAGS = re.IGNORECASE

_QUESTION = re.compile(
    rf"^(?P<verb>[a-z]+)\s+"
    rf"(?:(?P<time>{TIME_PATTERN})\s+)?"
    rf"(?:top-(?P<pretopk>\d+)\s+)?"
    rf"(?P<metrics>.+?)"
    rf"(?:\s+by\s+(?:top-(?P<topk>\d+)\s+)?(?P<dim>.+?))?"
    rf"(?:\s+as\s+(?P<chart>{CHART_PATTERN}))?$",
    _FLAGS,
)

_CHART_EDIT = re.compile(rf"\bas (?:a |an )?(?P<chart>{CHART_PATTERN})\b", _FLAGS)
_TOPK_EDIT = re.compile(r"\btop[- ]?(?P<k>\d+)(?:\s+(?P<dim>[a-z][a-z ]*?))?\s*$", _FLAGS)
_TOPK_INLINE = re.compile(r"\btop[- ]?(?P<k>\d+)\b", _FLAGS)
_TIME_EDIT = re.compile(rf"\b(?P<time>{TIME_PATTERN})\b", _FLAGS)
_LEADING = re.compile(r"^(?:(?:now|ok|okay|and|also|then|please|so|but)\s+)+", _FLAGS)

_CUES: list[tuple[str, re.Pattern[str]]] = [
    ("add", re.compile(r"^(?:(?:can you|please|let's|lets)\s+)?(?:add|include|plus)\s+(?P<x>.+)$", _FLAGS)),
    ("remove", re.compile(r"^(?:remove|drop|exclude|without)\s+(?P<x>.+)$", _FLAGS)),
    ("replace_pair", re.compile(r"^(?:replace|swap)\s+(?P<old>.+?)\s+(?:with|for)\s+(?P<x>.+)$", _FLAGS)),
    ("replace", re.compile(r"^(?:replace|swap)(?:\s+(?:it|that|this|them))?\s+with\s+(?P<x>.+)$", _FLAGS)),
    ("use", re.compile(r"^(?:use|show)\s+(?P<x>.+?)\s+instead$", _FLAGS)),
    ("change", re.compile(r"^(?:change|switch|set)(?:\s+(?:it|that|this|them))?\s+to\s+(?P<x>.+)$", _FLAGS)),
    ("by", re.compile(r"^(?:(?:group|split|break(?: it)? down|broken down|show(?: it)?)\s+)?(?:by|per)\s+(?P<x>.+)$", _FLAGS)),
]

_PRONOUN_METRICS = frozenset({"it", "that", "this", "them", "those", "these", "only", "me"})


class EditOp(str, enum.Enum):
    REPLACE_GRANULARITY = "replace_granularity"
    SET_CHART_TYPE = "set_chart_type"
    REPLACE_DIMENSION = "replace_dimension"
    REPLACE_METRIC = "replace_metric"
    ADD_METRIC = "add_metric"
    REMOVE_METRIC = "remove_metric"
    SET_TOPK = "set_topk"
    SET_TIME_FILTER = "set_time_filter"


@dataclass(frozen=True)
class Edit:
    op: EditOp
    value: str
    target: Optional[str] = None


def pluralize(phrase: str) -> str:
    head, _, last = phrase.rpartition(" ")
    low = last.lower()
    if low.endswith("s") and not low.endswith("ss"):
        word = last
    elif re.search(r"[^aeiou]y$", low):
        word = last[:-1] + "ies"
    elif re.search(r"(?:s|x|z|ch|sh)$", low):
        word = last + "es"
    else:
        word = last + "s"
    return f"{head} {word}" if head else word


def singularize(phrase: str) -> str:
    head, _, last = phrase.rpartition(" ")
    low = last.lower()
    if low.endswith("ies") and len(low) > 3:
        word = last[:-3] + "y"
    elif re.search(r"(?:ss|x|z|ch|sh)es$", low):
        word = last[:-2]
    elif low.endswith("s") and not low.endswith("ss"):
        word = last[:-1]
    else:
        word = last
    return f"{head} {word}" if head else word


@dataclass(frozen=True)
class Frame:
    verb: str
    metrics: tuple[str, ...]
    time: Optional[str] = None
    dimension: Optional[str] = None
    topk: Optional[int] = None
    chart: Optional[str] = None

    def render(self) -> str:
        words = [self.verb]
        if self.time:
            words.append(self.time)
        if self.topk is not None and not self.dimension:
            words.append(f"top-{self.topk}")
        words.append(" and ".join(self.metrics))
        if self.dimension:
            words.append("by")
            if self.topk is not None:
                words.append(f"top-{self.topk}")
                words.append(pluralize(self.dimension))
            else:
                words.append(self.dimension)
        if self.chart:
            words += ["as", self.chart]
        return " ".join(words)


def _clean(text: str) -> str:
    return " ".join(text.strip().rstrip("?.!").split())


def parse_question(text: str) -> Optional[Frame]:
    """Read a well-formed analytics question, or return ``None``."""
    m = _QUESTION.match(_clean(text))
    if not m:
        return None
    metrics = tuple(_clean(x) for x in re.split(r"\s+and\s+|\s*,\s*", m.group("metrics")) if x.strip())
    if not metrics or any(x.lower() in _PRONOUN_METRICS or x.lower().startswith("top-") for x in metrics):
        return None
    if m.group("time") is None and _TIME_EDIT.search(m.group("metrics")):
        return None
    topk = m.group("topk") or m.group("pretopk")
    dim = m.group("dim")
    if dim is not None and m.group("topk"):
        dim = singularize(dim)
    return Frame(
        verb=m.group("verb"),
        metrics=metrics,
        time=m.group("time"),
        dimension=dim,
        topk=int(topk) if topk else None,
        chart=m.group("chart"),
    )


def is_standalone(text: str) -> bool:
    """True when ``text`` is itself a complete analytics question with a breakdown."""
    frame = parse_question(text)
    return (
        frame is not None
        and frame.verb.lower() in ANALYSIS_VERBS
        and frame.dimension is not None
    )


def _metric_list(text: str) -> list[str]:
    return [_clean(x) for x in re.split(r"\s+and\s+|\s*,\s*", text) if x.strip()]


def _strip_articles(text: str) -> str:
    return re.sub(r"^(?:the|a|an)\s+", "", _clean(text), flags=_FLAGS)


class EditGrammar:
    """Follow-up parser; the metric lexicon decides ``change to X`` ambiguity."""

    def __init__(self, metrics: Iterable[str] = DEFAULT_METRICS) -> None:
        self.metrics = frozenset(m.lower() for m in metrics)

    def _time_edit(self, phrase: str) -> Edit:
        if re.fullmatch(TIME_FILTER_PATTERN, phrase, _FLAGS):
            return Edit(EditOp.SET_TIME_FILTER, phrase)
        return Edit(EditOp.REPLACE_GRANULARITY, phrase)

    def _classify_value(self, value: str, default: EditOp) -> Edit:
        value = _strip_articles(value)
        if re.fullmatch(CHART_PATTERN, value, _FLAGS):
            return Edit(EditOp.SET_CHART_TYPE, value)
        if re.fullmatch(TIME_PATTERN, value, _FLAGS):
            return self._time_edit(value)
        if value.lower() in self.metrics:
            return Edit(EditOp.REPLACE_METRIC, value)
        return Edit(default, value)

    def parse_followup(self, text: str) -> Optional[list[Edit]]:
        """Edits encoded by a follow-up, or ``None`` if it is not understood."""
        rest = _clean(text)
        edits: list[Edit] = []

        m = _CHART_EDIT.search(rest)
        if m:
            edits.append(Edit(EditOp.SET_CHART_TYPE, m.group("chart")))
            rest = _clean(rest[: m.start()] + " " + rest[m.end():])

        m = _TOPK_EDIT.search(rest) or _TOPK_INLINE.search(rest)
        if m:
            edits.append(Edit(EditOp.SET_TOPK, m.group("k")))
            dim = m.groupdict().get("dim")
            if dim and not all(w in FILLER_WORDS for w in dim.lower().split()):
                edits.append(Edit(EditOp.REPLACE_DIMENSION, singularize(_clean(dim))))
            rest = _clean(rest[: m.start()] + " " + rest[m.end():])

        m = _TIME_EDIT.search(rest)
        if m:
            edits.append(self._time_edit(m.group("time")))
            rest = _clean(rest[: m.start()] + " " + rest[m.end():])

        rest = _LEADING.sub("", rest)
        if rest:
            cue_edits = self._cue_edits(rest)
            if cue_edits is None:
                if not all(w in FILLER_WORDS for w in rest.lower().split()):
                    return None
            else:
                edits.extend(cue_edits)
        return edits or None

    def _cue_edits(self, rest: str) -> Optional[list[Edit]]:
        for name, pattern in _CUES:
            m = pattern.match(rest)
            if not m:
                continue
            x = m.group("x")
            if name == "add":
                return [Edit(EditOp.ADD_METRIC, v) for v in _metric_list(_strip_articles(x))]
            if name == "remove":
                return [Edit(EditOp.REMOVE_METRIC, v) for v in _metric_list(_strip_articles(x))]
            if name == "replace_pair":
                old = _strip_articles(m.group("old"))
                if old.lower() in {"it", "that", "this", "them"}:
                    return [self._classify_value(x, EditOp.REPLACE_METRIC)]
                return [Edit(EditOp.REPLACE_METRIC, _strip_articles(x), target=old)]
            if name in ("replace", "use"):
                return [self._classify_value(x, EditOp.REPLACE_METRIC)]
            if name == "change":
                return [self._classify_value(x, EditOp.REPLACE_DIMENSION)]
            if name == "by":
                return [Edit(EditOp.REPLACE_DIMENSION, _strip_articles(x))]
        return None

    def apply(self, frame: Frame, edits: Sequence[Edit]) -> Frame:
        for edit in edits:
            frame = apply_edit(frame, edit)
        return frame

    def fuse(self, base_question: str, followup: str) -> str:
        if not followup or not followup.strip():
            return base_question
        if is_standalone(followup):
            return _clean(followup)
        frame = parse_question(base_question)
        edits = self.parse_followup(followup)
        if frame is None or edits is None:
            return followup
        return self.apply(frame, edits).render()


def apply_edit(frame: Frame, edit: Edit) -> Frame:
    op, value = edit.op, edit.value
    if op in (EditOp.REPLACE_GRANULARITY, EditOp.SET_TIME_FILTER):
        return dataclasses.replace(frame, time=value)
    if op is EditOp.SET_CHART_TYPE:
        return dataclasses.replace(frame, chart=value)
    if op is EditOp.SET_TOPK:
        return dataclasses.replace(frame, topk=int(value))
    if op is EditOp.REPLACE_DIMENSION:
        return dataclasses.replace(frame, dimension=value)
    if op is EditOp.ADD_METRIC:
        if value.lower() in (m.lower() for m in frame.metrics):
            return frame
        return dataclasses.replace(frame, metrics=frame.metrics + (value,))
    if op is EditOp.REMOVE_METRIC:
        kept = tuple(m for m in frame.metrics if m.lower() != value.lower())
        return dataclasses.replace(frame, metrics=kept) if kept else frame
    if op is EditOp.REPLACE_METRIC:
        if edit.target is None:
            return dataclasses.replace(frame, metrics=(value,))
        swapped = tuple(value if m.lower() == edit.target.lower() else m for m in frame.metrics)
        if swapped == frame.metrics and frame.dimension and frame.dimension.lower() == edit.target.lower():
            return dataclasses.replace(frame, dimension=value)
        return dataclasses.replace(frame, metrics=swapped)
    raise ValueError(f"unsupported edit {op!r}")


DEFAULT_GRAMMAR = EditGrammar()


def rule_fuse(base_question: str, followup: str) -> str:
    """Merge a follow-up into the running analytics question.

    >>> rule_fuse("compare yearly revenue by country as line chart",
    ...           "now change to marketing channel")
    'compare yearly revenue by marketing channel as line chart'

    An empty follow-up returns ``base_question``; a follow-up the grammar
    cannot read is returned unchanged.
    """
    return DEFAULT_GRAMMAR.fuse(base_question, followup)
