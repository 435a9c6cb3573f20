"""Annotated conversation datasets: schema, IO, validation, stats, generation.

On disk a dataset is a line-delimited JSON file, one conversation per line::

    {"conversation_id": "c1", "task_type": "text_to_vis",
     "questions": [{"turn_index": 1, "user_query": "...", "gold_rewrite": "..."}, ...]}

Optional question fields are ``response``, ``gold_rewrite`` (absent means no
rewrite was needed), ``intent``, ``topic_id`` and ``question_id``. A sibling
``<stem>.manifest.json`` carries the dataset id, task type and, optionally,
declared statistics that the validator checks against the data.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

from .errors import ParseError, SchemaError
from .providers.grammar import (
    DEFAULT_GRAMMAR,
    Edit,
    EditOp,
    Frame,
    apply_edit,
    rule_fuse,
)

PathLike = Union[str, Path]


class TaskType(str, enum.Enum):
    TEXT_QA = "text_qa"
    TEXT_TO_VIS = "text_to_vis"


@dataclass(frozen=True)
class AnnotatedQuestion:
    turn_index: int
    user_query: str
    response: Optional[str] = None
    gold_rewrite: Optional[str] = None
    intent: Optional[str] = None
    topic_id: Optional[str] = None
    question_id: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"turn_index": self.turn_index, "user_query": self.user_query}
        for name in ("response", "gold_rewrite", "intent", "topic_id", "question_id"):
            value = getattr(self, name)
            if value is not None:
                doc[name] = value
        return doc


@dataclass(frozen=True)
class Conversation:
    conversation_id: str
    questions: tuple[AnnotatedQuestion, ...]

    def question_id(self, q: AnnotatedQuestion) -> str:
        return q.question_id or f"{self.conversation_id}:{q.turn_index}"

    def __len__(self) -> int:
        return len(self.questions)


@dataclass(frozen=True)
class DeclaredStats:
    n_questions: Optional[int] = None
    n_with_history: Optional[int] = None
    chat_length_range: Optional[tuple[int, int]] = None
    n_question_types: Optional[int] = None

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "DeclaredStats":
        rng = doc.get("chat_length_range")
        if isinstance(rng, int):
            rng = (rng, rng)
        return cls(
            n_questions=doc.get("n_questions"),
            n_with_history=doc.get("n_with_history"),
            chat_length_range=tuple(rng) if rng is not None else None,
            n_question_types=doc.get("n_question_types"),
        )

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {}
        if self.n_questions is not None:
            doc["n_questions"] = self.n_questions
        if self.n_with_history is not None:
            doc["n_with_history"] = self.n_with_history
        if self.chat_length_range is not None:
            doc["chat_length_range"] = list(self.chat_length_range)
        if self.n_question_types is not None:
            doc["n_question_types"] = self.n_question_types
        return doc


@dataclass(frozen=True)
class Dataset:
    dataset_id: str
    task_type: TaskType
    conversations: tuple[Conversation, ...] = ()
    declared_stats: Optional[DeclaredStats] = None
    validated: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "task_type", TaskType(self.task_type))
        object.__setattr__(self, "conversations", tuple(self.conversations))

    def questions(self) -> Iterable[tuple[Conversation, AnnotatedQuestion]]:
        for conv in self.conversations:
            for q in conv.questions:
                yield conv, q


@dataclass(frozen=True)
class DatasetStats:
    n_questions: int
    n_with_history: int
    min_chat_length: int
    max_chat_length: int
    n_distinct_intents: int
    n_conversations: int

    @property
    def chat_length_range(self) -> tuple[int, int]:
        return (self.min_chat_length, self.max_chat_length)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_questions": self.n_questions,
            "n_with_history": self.n_with_history,
            "chat_length_range": [self.min_chat_length, self.max_chat_length],
            "n_question_types": self.n_distinct_intents,
            "n_conversations": self.n_conversations,
        }

    def format_table(self, label: str = "") -> str:
        """Render the stats as one row under the usual column headings."""
        lo, hi = self.chat_length_range
        length = f"{lo}" if lo == hi else f"{lo}-{hi}"
        header = ("Dataset", "# Questions", "# Questions with Chat History", "Chat Length", "Question Types")
        row = (label, str(self.n_questions), str(self.n_with_history), length, str(self.n_distinct_intents))
        widths = [max(len(a), len(b)) for a, b in zip(header, row)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        return "\n".join(fmt.format(*cells).rstrip() for cells in (header, row))


def compute_stats(dataset: Dataset) -> DatasetStats:
    lengths = [len(c.questions) for c in dataset.conversations]
    questions = [q for _, q in dataset.questions()]
    return DatasetStats(
        n_questions=len(questions),
        n_with_history=sum(1 for q in questions if q.turn_index > 1),
        min_chat_length=min(lengths, default=0),
        max_chat_length=max(lengths, default=0),
        n_distinct_intents=len({q.intent for q in questions if q.intent is not None}),
        n_conversations=len(lengths),
    )


# ---------------------------------------------------------------------------
# validation

_QUESTION_KEYS = {"turn_index", "user_query", "response", "gold_rewrite", "intent", "topic_id", "question_id"}
_RECORD_KEYS = {"conversation_id", "task_type", "questions"}


def _is_text(value: Any) -> bool:
    return isinstance(value, str) and bool(value.strip())


def _check_record(doc: Any, loc: str, issues: list[tuple[str, str]]) -> Optional[Conversation]:
    if not isinstance(doc, Mapping):
        issues.append((loc, "record must be an object"))
        return None
    for key in sorted(set(doc) - _RECORD_KEYS):
        issues.append((loc, f"unknown field {key!r}"))
    cid = doc.get("conversation_id")
    if not isinstance(cid, (str, int)) or isinstance(cid, bool) or str(cid) == "":
        issues.append((loc, "conversation_id missing or not a string"))
        return None
    loc = f"{loc} conversation {cid}"
    questions = doc.get("questions")
    if not isinstance(questions, list):
        issues.append((loc, "questions must be an array"))
        return None
    parsed = []
    ok = True
    for pos, q in enumerate(questions, start=1):
        qloc = f"{loc} question {pos}"
        if not isinstance(q, Mapping):
            issues.append((qloc, "question must be an object"))
            ok = False
            continue
        for key in sorted(set(q) - _QUESTION_KEYS):
            issues.append((qloc, f"unknown field {key!r}"))
            ok = False
        idx = q.get("turn_index")
        if not isinstance(idx, int) or isinstance(idx, bool):
            issues.append((qloc, "turn_index must be an integer"))
            ok = False
        elif idx != pos:
            issues.append((qloc, f"turn index gap: expected {pos}, got {idx}"))
            ok = False
        if not _is_text(q.get("user_query")):
            issues.append((qloc, "user_query must be non-empty text"))
            ok = False
        if "gold_rewrite" in q and q["gold_rewrite"] is not None and not _is_text(q["gold_rewrite"]):
            issues.append((qloc, "gold_rewrite, when present, must be non-empty text"))
            ok = False
        for key in ("response", "intent", "topic_id", "question_id"):
            if q.get(key) is not None and not isinstance(q[key], str):
                issues.append((qloc, f"{key} must be text"))
                ok = False
        if ok:
            parsed.append(
                AnnotatedQuestion(
                    turn_index=idx,
                    user_query=q["user_query"],
                    response=q.get("response"),
                    gold_rewrite=q.get("gold_rewrite"),
                    intent=q.get("intent"),
                    topic_id=q.get("topic_id"),
                    question_id=q.get("question_id"),
                )
            )
    if not ok:
        return None
    return Conversation(str(cid), tuple(parsed))


def dataset_issues(dataset: Dataset) -> list[tuple[str, str]]:
    """Every schema and declared-stats problem in an in-memory dataset."""
    issues: list[tuple[str, str]] = []
    seen: set[str] = set()
    for conv in dataset.conversations:
        loc = f"conversation {conv.conversation_id}"
        if conv.conversation_id in seen:
            issues.append((loc, "duplicate conversation_id"))
        seen.add(conv.conversation_id)
        for pos, q in enumerate(conv.questions, start=1):
            qloc = f"{loc} question {pos}"
            if q.turn_index != pos:
                issues.append((qloc, f"turn index gap: expected {pos}, got {q.turn_index}"))
            if not _is_text(q.user_query):
                issues.append((qloc, "user_query must be non-empty text"))
            if q.gold_rewrite is not None and not _is_text(q.gold_rewrite):
                issues.append((qloc, "gold_rewrite, when present, must be non-empty text"))
    if dataset.declared_stats is not None and not issues:
        issues.extend(_stats_issues(compute_stats(dataset), dataset.declared_stats))
    return issues


def _stats_issues(stats: DatasetStats, declared: DeclaredStats) -> list[tuple[str, str]]:
    out = []
    if declared.n_questions is not None and declared.n_questions != stats.n_questions:
        out.append(("declared_stats", f"n_questions declared {declared.n_questions}, found {stats.n_questions}"))
    if declared.n_with_history is not None and declared.n_with_history != stats.n_with_history:
        out.append(("declared_stats", f"n_with_history declared {declared.n_with_history}, found {stats.n_with_history}"))
    if declared.chat_length_range is not None and stats.n_conversations:
        lo, hi = declared.chat_length_range
        if stats.min_chat_length < lo or stats.max_chat_length > hi:
            out.append((
                "declared_stats",
                f"chat lengths {stats.min_chat_length}-{stats.max_chat_length} outside declared range {lo}-{hi}",
            ))
    if declared.n_question_types is not None and declared.n_question_types != stats.n_distinct_intents:
        out.append((
            "declared_stats",
            f"n_question_types declared {declared.n_question_types}, found {stats.n_distinct_intents}",
        ))
    return out


def validate_dataset(dataset: Dataset) -> Dataset:
    """Return the dataset marked as validated, or raise ``SchemaError``."""
    issues = dataset_issues(dataset)
    if issues:
        raise SchemaError(issues)
    if dataset.validated:
        return dataset
    return Dataset(dataset.dataset_id, dataset.task_type, dataset.conversations, dataset.declared_stats, validated=True)


# ---------------------------------------------------------------------------
# IO

def manifest_path_for(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def load_dataset(path: PathLike) -> Dataset:
    """Load and validate a dataset from a ``.jsonl`` file or its manifest.

    All schema problems are collected into a single ``SchemaError``; invalid
    JSON raises ``ParseError`` with the offending line.
    """
    path = Path(path)
    manifest: dict[str, Any] = {}
    if path.suffix == ".json":
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(path, exc.lineno, f"invalid manifest JSON: {exc.msg}") from None
        data_path = path.parent / manifest["path"]
    else:
        data_path = path
        sibling = manifest_path_for(path)
        if sibling.exists():
            manifest = json.loads(sibling.read_text(encoding="utf-8"))

    issues: list[tuple[str, str]] = []
    conversations = []
    task_types = set()
    with open(data_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(data_path, lineno, f"invalid JSON: {exc.msg}") from None
            loc = f"{data_path.name}:{lineno}"
            if isinstance(doc, Mapping) and "task_type" in doc:
                try:
                    task_types.add(TaskType(doc["task_type"]))
                except ValueError:
                    issues.append((loc, f"unknown task_type {doc['task_type']!r}"))
            conv = _check_record(doc, loc, issues)
            if conv is not None:
                conversations.append(conv)

    declared_task = manifest.get("task_type")
    if declared_task is not None:
        try:
            task_types.add(TaskType(declared_task))
        except ValueError:
            issues.append(("manifest", f"unknown task_type {declared_task!r}"))
    if len(task_types) > 1:
        issues.append((data_path.name, f"mixed task types: {sorted(t.value for t in task_types)}"))
    task_type = next(iter(task_types)) if len(task_types) == 1 else TaskType.TEXT_QA

    declared = DeclaredStats.from_dict(manifest["declared_stats"]) if manifest.get("declared_stats") else None
    dataset = Dataset(
        dataset_id=manifest.get("dataset_id", data_path.stem),
        task_type=task_type,
        conversations=tuple(conversations),
        declared_stats=declared,
    )
    if not issues:
        issues = dataset_issues(dataset)
    if issues:
        raise SchemaError(issues)
    return Dataset(dataset.dataset_id, dataset.task_type, dataset.conversations, declared, validated=True)


def dataset_lines(dataset: Dataset) -> list[str]:
    return [
        json.dumps(
            {
                "conversation_id": conv.conversation_id,
                "task_type": dataset.task_type.value,
                "questions": [q.to_dict() for q in conv.questions],
            },
            ensure_ascii=False,
        )
        for conv in dataset.conversations
    ]


def save_dataset(dataset: Dataset, path: PathLike) -> Path:
    """Write ``path`` (JSONL) plus its sibling manifest; returns the manifest path."""
    path = Path(path)
    lines = dataset_lines(dataset)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    manifest: dict[str, Any] = {
        "dataset_id": dataset.dataset_id,
        "task_type": dataset.task_type.value,
        "path": path.name,
    }
    if dataset.declared_stats is not None:
        manifest["declared_stats"] = dataset.declared_stats.to_dict()
    mpath = manifest_path_for(path)
    mpath.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return mpath


# ---------------------------------------------------------------------------
# synthetic generation

VIS_VERBS = ("compare", "show", "plot")
VIS_METRICS = (
    "revenue", "pageviews", "orders", "sales", "visits", "sessions", "conversions",
    "clicks", "impressions", "signups", "profit", "downloads", "active users", "bounce rate",
)
VIS_DIMENSIONS = (
    "country", "marketing channel", "device", "region", "product category", "browser",
    "city", "campaign", "customer segment", "landing page", "sales rep", "store",
)
VIS_GRANULARITIES = (
    "daily", "weekly", "monthly", "quarterly", "yearly",
    "week over week", "month over month", "year over year",
)
VIS_TIME_FILTERS = ("this month", "last month", "this year", "last quarter", "last 7 days", "last 30 days")
VIS_CHARTS = ("bar", "line chart", "pie chart", "area chart", "table", "stacked bar", "scatter plot")

_FOLLOWUPS: dict[EditOp, tuple[str, ...]] = {
    EditOp.REPLACE_GRANULARITY: ("{v}", "what about {v}", "make it {v}", "show it {v}"),
    EditOp.SET_TIME_FILTER: ("show only {v}", "what about {v}", "just {v}", "{v} only"),
    EditOp.SET_CHART_TYPE: ("show it as a {v}", "as {v}", "change it to a {v}", "display as {v}"),
    EditOp.REPLACE_DIMENSION: ("now change to {v}", "break it down by {v}", "group by {v}", "switch to {v}"),
    EditOp.REPLACE_METRIC: ("replace with {v}", "show {v} instead", "use {v} instead", "switch to {v}"),
    EditOp.ADD_METRIC: ("add {v}", "also add {v}", "include {v}"),
    EditOp.REMOVE_METRIC: ("remove {v}", "drop {v}"),
    EditOp.SET_TOPK: ("show top-{v}", "what about top-{v}", "only top-{v}"),
}

DEFAULT_VIS_VOCABULARY = tuple(_FOLLOWUPS)

QA_FEATURES = (
    "streaming segmentation", "batch segmentation", "audience builder", "data export",
    "identity graph", "journey orchestration", "schema registry", "query service",
    "destination connector", "consent policy", "profile merge", "data lake",
)
QA_OPENERS = ("what is {f}", "what does {f} do", "explain {f}")
QA_FOLLOWUPS = (
    ("comparison", "how does it differ from {g}?", "how does {f} differ from {g}?"),
    ("procedure", "how do I enable it?", "how do I enable {f}?"),
    ("procedure", "can I schedule it?", "can I schedule {f}?"),
    ("procedure", "what permissions does it need?", "what permissions does {f} need?"),
    ("comparison", "is it faster than {g}?", "is {f} faster than {g}?"),
    ("definition", "what about {g}?", "what is {g}?"),
)


@dataclass(frozen=True)
class SyntheticProfile:
    task_type: TaskType
    n_conversations: int
    length_range: tuple[int, int] = (2, 5)
    seed: int = 0
    edit_vocabulary: tuple[EditOp, ...] = DEFAULT_VIS_VOCABULARY
    lengths: Optional[tuple[int, ...]] = None
    topic_switch_prob: float = 0.0
    dataset_id: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "task_type", TaskType(self.task_type))
        object.__setattr__(self, "edit_vocabulary", tuple(EditOp(e) for e in self.edit_vocabulary))
        lo, hi = self.length_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad length_range {self.length_range}")
        if self.lengths is not None and len(self.lengths) != self.n_conversations:
            raise ValueError("lengths must give one length per conversation")


def _random_base(rng: random.Random) -> Frame:
    time = rng.choice(VIS_GRANULARITIES) if rng.random() < 0.5 else None
    chart = rng.choice(VIS_CHARTS) if rng.random() < 0.3 else None
    return Frame(
        verb=rng.choice(VIS_VERBS),
        metrics=(rng.choice(VIS_METRICS),),
        time=time,
        dimension=rng.choice(VIS_DIMENSIONS),
        chart=chart,
    )


def _candidate_edit(op: EditOp, frame: Frame, rng: random.Random) -> Optional[Edit]:
    def pick(pool: Sequence[str], current: Iterable[Optional[str]]) -> Optional[str]:
        cur = {c for c in current if c}
        choices = [p for p in pool if p not in cur]
        return rng.choice(choices) if choices else None

    if op is EditOp.REPLACE_GRANULARITY:
        v = pick(VIS_GRANULARITIES, [frame.time])
    elif op is EditOp.SET_TIME_FILTER:
        v = pick(VIS_TIME_FILTERS, [frame.time])
    elif op is EditOp.SET_CHART_TYPE:
        v = pick(VIS_CHARTS, [frame.chart])
    elif op is EditOp.REPLACE_DIMENSION:
        v = pick(VIS_DIMENSIONS, [frame.dimension])
    elif op is EditOp.REPLACE_METRIC or op is EditOp.ADD_METRIC:
        if op is EditOp.ADD_METRIC and len(frame.metrics) >= 3:
            return None
        v = pick(VIS_METRICS, frame.metrics)
    elif op is EditOp.REMOVE_METRIC:
        v = rng.choice(frame.metrics) if len(frame.metrics) > 1 else None
    elif op is EditOp.SET_TOPK:
        v = pick(["3", "5", "10"], [str(frame.topk) if frame.topk else None])
    else:
        v = None
    return Edit(op, v) if v is not None else None


def _vis_conversation(cid: str, length: int, profile: SyntheticProfile, rng: random.Random) -> Conversation:
    frame = _random_base(rng)
    first = frame.render()
    questions = [AnnotatedQuestion(1, first, gold_rewrite=first, intent="new_question", topic_id="t1")]
    gold = first
    topic = 1
    for turn in range(2, length + 1):
        if profile.topic_switch_prob and rng.random() < profile.topic_switch_prob:
            frame = _random_base(rng)
            topic += 1
            gold = frame.render()
            questions.append(
                AnnotatedQuestion(turn, gold, gold_rewrite=gold, intent="new_question", topic_id=f"t{topic}")
            )
            continue
        for _ in range(100):
            op = rng.choice(profile.edit_vocabulary)
            edit = _candidate_edit(op, frame, rng)
            if edit is None:
                continue
            followup = rng.choice(_FOLLOWUPS[op]).format(v=edit.value)
            expected = apply_edit(frame, edit)
            fused = rule_fuse(gold, followup)
            # keep only follow-ups the grammar reads back to the intended edit
            if fused == expected.render() and fused != gold:
                break
        else:
            raise RuntimeError(f"could not sample a consistent edit for {cid} turn {turn}")
        frame, gold = expected, fused
        questions.append(
            AnnotatedQuestion(turn, followup, gold_rewrite=gold, intent=op.value, topic_id=f"t{topic}")
        )
    return Conversation(cid, tuple(questions))


def _qa_conversation(cid: str, length: int, rng: random.Random) -> Conversation:
    focus = rng.choice(QA_FEATURES)
    opener = rng.choice(QA_OPENERS).format(f=focus)
    questions = [
        AnnotatedQuestion(
            1, opener, response=_qa_answer(focus), gold_rewrite=opener, intent="definition"
        )
    ]
    for turn in range(2, length + 1):
        other = rng.choice([f for f in QA_FEATURES if f != focus])
        intent, followup, gold = rng.choice(QA_FOLLOWUPS)
        followup = followup.format(g=other)
        gold = gold.format(f=focus, g=other)
        if intent == "definition":
            focus = other
        questions.append(
            AnnotatedQuestion(turn, followup, response=_qa_answer(focus), gold_rewrite=gold, intent=intent)
        )
    return Conversation(cid, tuple(questions))


def _qa_answer(feature: str) -> str:
    return f"{feature[0].upper()}{feature[1:]} is a product feature; see its documentation page for setup steps."


def generate_synthetic(profile: SyntheticProfile) -> Dataset:
    """Build a reproducible synthetic corpus from ``profile``.

    Text-to-vis conversations start from a sampled analytics question and
    apply random grammar edits; every gold rewrite is the rule-fused
    question, so a rule-based fusion model reproduces it exactly. Text-QA
    conversations come from fixed question/follow-up templates.
    """
    rng = random.Random(profile.seed)
    lo, hi = profile.length_range
    conversations = []
    for n in range(profile.n_conversations):
        length = profile.lengths[n] if profile.lengths is not None else rng.randint(lo, hi)
        cid = f"syn-{profile.seed}-{n + 1:04d}"
        if profile.task_type is TaskType.TEXT_TO_VIS:
            conversations.append(_vis_conversation(cid, length, profile, rng))
        else:
            conversations.append(_qa_conversation(cid, length, rng))
    dataset_id = profile.dataset_id or f"synthetic-{profile.task_type.value}-seed{profile.seed}"
    return validate_dataset(Dataset(dataset_id, profile.task_type, tuple(conversations)))


def grammar_reachable(conversation: Conversation) -> bool:
    """Whether every gold rewrite follows from the previous one by ``rule_fuse``."""
    prev: Optional[str] = None
    for q in conversation.questions:
        expected = q.user_query if prev is None else DEFAULT_GRAMMAR.fuse(prev, q.user_query)
        if q.gold_rewrite is not None and q.gold_rewrite != expected:
            return False
        prev = q.gold_rewrite if q.gold_rewrite is not None else expected
    return True
