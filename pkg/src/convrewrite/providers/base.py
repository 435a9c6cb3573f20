from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np


@dataclass(frozen=True)
class ProviderDescriptor:
    provider_id: str
    model_name: str = ""
    deterministic: bool = False

    def to_dict(self) -> dict:
        return {
            "provider_id": self.provider_id,
            "model_name": self.model_name,
            "deterministic": self.deterministic,
        }


@dataclass(frozen=True)
class EmbeddingDescriptor:
    provider_id: str
    dimension: int

    def to_dict(self) -> dict:
        return {"provider_id": self.provider_id, "dimension": self.dimension}


@runtime_checkable
class GenerativeModelProvider(Protocol):
    descriptor: ProviderDescriptor

    def generate(self, prompt: str) -> str: ...


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Sentence and per-token embeddings of a fixed dimension.

    ``embed("")`` must return the zero vector rather than raise.
    """

    descriptor: EmbeddingDescriptor

    def embed(self, text: str) -> np.ndarray: ...

    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]: ...


def is_zero(vector: Sequence[float] | np.ndarray) -> bool:
    """The flag for degenerate (empty-text) embeddings."""
    return not np.any(np.asarray(vector))
