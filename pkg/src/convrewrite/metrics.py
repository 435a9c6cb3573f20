"""Similarity metrics between a predicted and a gold rewrite.

Both metrics use the same embedding provider: cosine similarity over
sentence vectors, and a BERTScore-style F1 over token vectors (greedy
max-similarity matching, no idf weighting, no baseline rescaling).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptyQuery, NonPositiveBaseline, ProviderError, ProviderErrorKind
from .providers.base import EmbeddingProvider


def cosine_score(y: np.ndarray, y_hat: np.ndarray) -> tuple[float, bool]:
    """Cosine similarity plus a flag that is True when either vector is zero.

    A zero vector scores 0.0 instead of dividing by zero.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise DimensionMismatch(y.size, y_hat.size)
    ny = np.linalg.norm(y)
    nh = np.linalg.norm(y_hat)
    if ny == 0.0 or nh == 0.0:
        return 0.0, True
    value = float(np.dot(y, y_hat) / (ny * nh))
    return min(1.0, max(-1.0, value)), False


def cosine_similarity(y: np.ndarray, y_hat: np.ndarray) -> float:
    return cosine_score(y, y_hat)[0]


@dataclass(frozen=True)
class BertScore:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def harmonic_mean(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    return np.divide(mat, norms, out=np.zeros_like(mat), where=norms > 0)


def bert_score_from_embeddings(cand: np.ndarray, ref: np.ndarray) -> BertScore:
    """Greedy matching on precomputed token embeddings (rows are tokens)."""
    cand = np.atleast_2d(np.asarray(cand, dtype=np.float64))
    ref = np.atleast_2d(np.asarray(ref, dtype=np.float64))
    if cand.shape[0] == 0 or ref.shape[0] == 0 or cand.size == 0 or ref.size == 0:
        return BertScore(0.0, 0.0, 0.0, degenerate=True)
    if cand.shape[1] != ref.shape[1]:
        raise DimensionMismatch(cand.shape[1], ref.shape[1])
    sim = _unit_rows(cand) @ _unit_rows(ref).T
    np.clip(sim, -1.0, 1.0, out=sim)
    # cosine can be negative for real encoders; scores are reported in [0, 1]
    p = float(max(0.0, sim.max(axis=1).mean()))
    r = float(max(0.0, sim.max(axis=0).mean()))
    return BertScore(p, r, harmonic_mean(p, r))


def bert_f1(candidate: str, reference: str, embedder: EmbeddingProvider) -> BertScore:
    _, cand = _embed_tokens(embedder, candidate)
    _, ref = _embed_tokens(embedder, reference)
    return bert_score_from_embeddings(cand, ref)


def _embed_tokens(embedder: EmbeddingProvider, text: str):
    try:
        return embedder.embed_tokens(text)
    except ProviderError:
        raise
    except Exception as exc:
        pid = getattr(getattr(embedder, "descriptor", None), "provider_id", "embedder")
        raise ProviderError(ProviderErrorKind.OTHER, repr(exc), provider_id=pid) from exc


@dataclass(frozen=True)
class QuestionScore:
    question_id: str
    approach_id: str
    predicted_rewrite: str
    gold_rewrite: str
    cosine: float
    bert_precision: float
    bert_recall: float
    bert_f1: float
    degenerate: bool = False
    has_history: bool = True
    conversation_id: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "conversation_id": self.conversation_id,
            "approach_id": self.approach_id,
            "predicted_rewrite": self.predicted_rewrite,
            "gold_rewrite": self.gold_rewrite,
            "cosine": self.cosine,
            "bert_precision": self.bert_precision,
            "bert_recall": self.bert_recall,
            "bert_f1": self.bert_f1,
            "degenerate": self.degenerate,
            "has_history": self.has_history,
        }


def score_question(
    gold: str,
    predicted: str,
    embedder: EmbeddingProvider,
    *,
    question_id: str = "",
    approach_id: str = "",
    has_history: bool = True,
    conversation_id: Optional[str] = None,
) -> QuestionScore:
    """Score one predicted rewrite against its gold rewrite."""
    if not gold or not gold.strip():
        raise EmptyQuery("gold rewrite must be non-empty")
    predicted = predicted or ""
    try:
        cos, cos_degenerate = cosine_score(embedder.embed(gold), embedder.embed(predicted))
    except (ProviderError, DimensionMismatch):
        raise
    except Exception as exc:
        raise ProviderError(ProviderErrorKind.OTHER, repr(exc), provider_id=embedder.descriptor.provider_id) from exc
    bs = bert_f1(predicted, gold, embedder)
    return QuestionScore(
        question_id=question_id,
        approach_id=approach_id,
        predicted_rewrite=predicted,
        gold_rewrite=gold,
        cosine=cos,
        bert_precision=bs.precision,
        bert_recall=bs.recall,
        bert_f1=bs.f1,
        degenerate=cos_degenerate or bs.degenerate,
        has_history=has_history,
        conversation_id=conversation_id,
    )


def relative_gain(a: float, b: float) -> float:
    """Percentage gain of ``a`` over baseline ``b``: ``100 * (a - b) / b``."""
    if not b > 0:
        raise NonPositiveBaseline(b)
    return 100.0 * (a - b) / b
