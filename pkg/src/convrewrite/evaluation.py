"""Replay annotated conversations through rewrite approaches and score them.

Each conversation is an independent unit of work and may be scored on a
thread pool; within a conversation turns run strictly in order because a
fusion step depends on the previous rewrite. The report is assembled in
dataset order whatever order the workers finish in.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

from .core import ConversationSession, RewriteConfig
from .datasets import Conversation, Dataset, validate_dataset
from .engine import advance_session
from .errors import ConvRewriteError, ProviderError, ValidationError
from .gate import GateClassifier
from .metrics import QuestionScore, relative_gain, score_question
from .prompts import TemplateRegistry
from .providers.base import EmbeddingProvider, GenerativeModelProvider

APPROACH_LABELS = {
    "query_fusion": "Query Fusion",
    "query_rewrite": "Query Rewrite",
    "query_rewrite+gate": "Query Rewrite + Gate",
    "query_fusion+gate": "Query Fusion + Gate",
}

METRICS = ("cosine", "bert_f1")


@dataclass(frozen=True)
class Aggregate:
    n: int
    mean_cosine: Optional[float]
    mean_bert_f1: Optional[float]

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "mean_cosine": self.mean_cosine, "mean_bert_f1": self.mean_bert_f1}

    def metric(self, name: str) -> Optional[float]:
        return {"cosine": self.mean_cosine, "bert_f1": self.mean_bert_f1}[name]


@dataclass(frozen=True)
class Gain:
    approach: str
    baseline: str
    metric: str
    gain_pct: float
    mean_per_question_gain_pct: Optional[float] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "approach": self.approach,
            "baseline": self.baseline,
            "metric": self.metric,
            "gain_pct": self.gain_pct,
            "mean_per_question_gain_pct": self.mean_per_question_gain_pct,
        }


@dataclass(frozen=True)
class ConversationFailure:
    conversation_id: str
    approach_id: str
    error: str

    def to_dict(self) -> dict[str, str]:
        return {"conversation_id": self.conversation_id, "approach_id": self.approach_id, "error": self.error}


@dataclass
class EvalReport:
    dataset_id: str
    approaches: list[str]
    scores: list[QuestionScore]
    aggregates: dict[str, Aggregate]
    history_aggregates: dict[str, Aggregate]
    gains: list[Gain]
    failures: list[ConversationFailure] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)
    task_label: Optional[str] = None

    def gain(self, approach: str, baseline: str, metric: str) -> Gain:
        for g in self.gains:
            if (g.approach, g.baseline, g.metric) == (approach, baseline, metric):
                return g
        raise KeyError((approach, baseline, metric))

    def scores_for(self, approach: str) -> list[QuestionScore]:
        return [s for s in self.scores if s.approach_id == approach]

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset_id": self.dataset_id,
            "task_label": self.task_label,
            "approaches": list(self.approaches),
            "aggregates": {k: v.to_dict() for k, v in self.aggregates.items()},
            "history_aggregates": {k: v.to_dict() for k, v in self.history_aggregates.items()},
            "gains": [g.to_dict() for g in self.gains],
            "failures": [f.to_dict() for f in self.failures],
            "metadata": self.metadata,
            "scores": [s.to_dict() for s in self.scores],
        }

    def to_json(self, **kwargs: Any) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, **kwargs)


def _mean(values: Sequence[float]) -> Optional[float]:
    return math.fsum(values) / len(values) if values else None


def aggregate(scores: Iterable[QuestionScore], approaches: Sequence[str]) -> dict[str, Aggregate]:
    scores = list(scores)
    out = {}
    for a in approaches:
        mine = [s for s in scores if s.approach_id == a]
        out[a] = Aggregate(len(mine), _mean([s.cosine for s in mine]), _mean([s.bert_f1 for s in mine]))
    return out


def _per_question_gain(scores: Sequence[QuestionScore], a: str, b: str, metric: str) -> Optional[float]:
    base = {s.question_id: getattr(s, metric) for s in scores if s.approach_id == b}
    gains = [
        relative_gain(getattr(s, metric), base[s.question_id])
        for s in scores
        if s.approach_id == a and base.get(s.question_id, 0) > 0
    ]
    return _mean(gains)


def pairwise_gains(
    scores: Sequence[QuestionScore], aggregates: Mapping[str, Aggregate]
) -> list[Gain]:
    """Relative gain of every approach over every other, per metric.

    ``gain_pct`` compares the aggregate means; ``mean_per_question_gain_pct``
    averages per-question gains over questions scored by both approaches.
    Pairs where either side has no scores are skipped.
    """
    gains = []
    names = list(aggregates)
    for a in names:
        for b in names:
            if a == b:
                continue
            for metric in METRICS:
                va, vb = aggregates[a].metric(metric), aggregates[b].metric(metric)
                if va is None or vb is None or vb <= 0:
                    continue
                gains.append(Gain(a, b, metric, relative_gain(va, vb), _per_question_gain(scores, a, b, metric)))
    return gains


def build_report(
    dataset_id: str,
    approaches: Sequence[str],
    scores: Sequence[QuestionScore],
    *,
    failures: Sequence[ConversationFailure] = (),
    metadata: Optional[Mapping[str, Any]] = None,
    task_label: Optional[str] = None,
) -> EvalReport:
    scores = list(scores)
    aggs = aggregate(scores, approaches)
    hist = aggregate([s for s in scores if s.has_history], approaches)
    return EvalReport(
        dataset_id=dataset_id,
        approaches=list(approaches),
        scores=scores,
        aggregates=aggs,
        history_aggregates=hist,
        gains=pairwise_gains(scores, aggs),
        failures=list(failures),
        metadata=dict(metadata or {}),
        task_label=task_label,
    )


ApproachSpec = Union[Mapping[str, RewriteConfig], Sequence[RewriteConfig]]


def _named_approaches(approaches: ApproachSpec) -> dict[str, RewriteConfig]:
    if isinstance(approaches, Mapping):
        return dict(approaches)
    named: dict[str, RewriteConfig] = {}
    for cfg in approaches:
        if cfg.approach_id in named:
            raise ValueError(f"duplicate approach {cfg.approach_id!r}; pass a mapping to name them")
        named[cfg.approach_id] = cfg
    return named


def _score_conversation(
    conv: Conversation,
    approach_id: str,
    config: RewriteConfig,
    model: GenerativeModelProvider,
    embedder: EmbeddingProvider,
    gate: Optional[GateClassifier],
    templates: Optional[TemplateRegistry],
) -> tuple[list[QuestionScore], Optional[ConversationFailure]]:
    session = ConversationSession(session_id=conv.conversation_id)
    scores = []
    try:
        for q in conv.questions:
            response = q.response if config.include_responses else None
            session, outcome = advance_session(session, q.user_query, response, config, model, gate, templates)
            if q.gold_rewrite is None:
                continue
            scores.append(
                score_question(
                    q.gold_rewrite,
                    outcome.rewritten_query,
                    embedder,
                    question_id=conv.question_id(q),
                    approach_id=approach_id,
                    has_history=q.turn_index > 1,
                    conversation_id=conv.conversation_id,
                )
            )
    except (ProviderError, ConvRewriteError) as exc:
        # the whole conversation is dropped so approaches stay comparable
        return [], ConversationFailure(conv.conversation_id, approach_id, str(exc))
    return scores, None


def run_eval(
    dataset: Dataset,
    approaches: ApproachSpec,
    model: GenerativeModelProvider,
    embedder: EmbeddingProvider,
    gate: Optional[GateClassifier] = None,
    *,
    templates: Optional[TemplateRegistry] = None,
    jobs: int = 1,
) -> EvalReport:
    """Score every approach on every gold-labelled question of ``dataset``.

    Fusion approaches chain their own rewrites; raw-history approaches see
    the dataset's responses when the config includes them. A provider error
    drops that conversation for that approach and is listed in
    ``report.failures``.
    """
    if not dataset.validated:
        try:
            dataset = validate_dataset(dataset)
        except ValidationError as exc:
            raise ValidationError(exc.issues, summary=f"dataset {dataset.dataset_id!r} failed validation") from None
    named = _named_approaches(approaches)

    units = [(conv, aid, cfg) for aid, cfg in named.items() for conv in dataset.conversations]

    def work(unit):
        conv, aid, cfg = unit
        return _score_conversation(conv, aid, cfg, model, embedder, gate, templates)

    if jobs > 1 and len(units) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, units))
    else:
        results = [work(u) for u in units]

    scores: list[QuestionScore] = []
    failures: list[ConversationFailure] = []
    for chunk, failure in results:
        scores.extend(chunk)
        if failure is not None:
            failures.append(failure)

    metadata = {
        "configs": {aid: cfg.to_dict() for aid, cfg in named.items()},
        "model": _descriptor(model),
        "embedder": _descriptor(embedder),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "n_conversations": len(dataset.conversations),
    }
    return build_report(
        dataset.dataset_id,
        list(named),
        scores,
        failures=failures,
        metadata=metadata,
        task_label=_task_label(dataset),
    )


def _descriptor(obj: Any) -> Any:
    d = getattr(obj, "descriptor", None)
    return d.to_dict() if hasattr(d, "to_dict") else repr(obj)


def _task_label(dataset: Dataset) -> str:
    return {"text_qa": "Text-based Q&A", "text_to_vis": "Text-to-Vis"}[dataset.task_type.value]


# ---------------------------------------------------------------------------
# score fixtures

def load_score_fixture(path: Union[str, Path], dataset_id: Optional[str] = None, task_label: Optional[str] = None) -> EvalReport:
    """Aggregate precomputed scores: a JSON array of
    ``{question_id, approach_id, cosine, bert_f1}`` records."""
    path = Path(path)
    records = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(records, list):
        raise ValidationError([(str(path), "score fixture must be a JSON array")])
    issues = []
    scores = []
    approaches: list[str] = []
    for i, rec in enumerate(records):
        loc = f"{path.name}[{i}]"
        missing = [k for k in ("question_id", "approach_id", "cosine", "bert_f1") if k not in rec]
        if missing:
            issues.append((loc, f"missing {', '.join(missing)}"))
            continue
        if rec["approach_id"] not in approaches:
            approaches.append(rec["approach_id"])
        scores.append(
            QuestionScore(
                question_id=str(rec["question_id"]),
                approach_id=rec["approach_id"],
                predicted_rewrite=rec.get("predicted_rewrite", ""),
                gold_rewrite=rec.get("gold_rewrite", ""),
                cosine=float(rec["cosine"]),
                bert_precision=float(rec.get("bert_precision", rec["bert_f1"])),
                bert_recall=float(rec.get("bert_recall", rec["bert_f1"])),
                bert_f1=float(rec["bert_f1"]),
                has_history=bool(rec.get("has_history", True)),
            )
        )
    if issues:
        raise ValidationError(issues, summary="invalid score fixture")
    return build_report(
        dataset_id or path.stem.removeprefix("scores_"),
        approaches,
        scores,
        metadata={"source": str(path)},
        task_label=task_label,
    )


# ---------------------------------------------------------------------------
# presentation

def approach_label(approach_id: str) -> str:
    return APPROACH_LABELS.get(approach_id, approach_id)


def _fmt(v: Optional[float]) -> str:
    return "-" if v is None else f"{v:.3f}"


def render_table(reports: Sequence[EvalReport], *, history_only: bool = False) -> str:
    """Plain-text comparison table: Task / Approach / Cosine Similarity / BERT F1.

    Values are rounded to three decimals here and nowhere else.
    """
    header = ("Task", "Approach", "Cosine Similarity", "BERT F1", "n")
    rows = []
    for rep in reports:
        aggs = rep.history_aggregates if history_only else rep.aggregates
        task = rep.task_label or rep.dataset_id
        for i, a in enumerate(rep.approaches):
            agg = aggs[a]
            rows.append((task if i == 0 else "", approach_label(a), _fmt(agg.mean_cosine), _fmt(agg.mean_bert_f1), str(agg.n)))
    widths = [max(len(h), *(len(r[c]) for r in rows)) if rows else len(h) for c, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    rule = "  ".join("-" * w for w in widths)
    lines = [fmt.format(*header), rule]
    lines += [fmt.format(*r) for r in rows]
    return "\n".join(line.rstrip() for line in lines)


def render_gains(report: EvalReport) -> str:
    lines = []
    for g in report.gains:
        per_q = "" if g.mean_per_question_gain_pct is None else f" (per-question mean {g.mean_per_question_gain_pct:+.1f}%)"
        lines.append(
            f"{approach_label(g.approach)} vs {approach_label(g.baseline)} [{g.metric}]: {g.gain_pct:+.1f}%{per_q}"
        )
    return "\n".join(lines)
