"""Deterministic bag-of-tokens embeddings for offline evaluation."""

from __future__ import annotations

import hashlib
import re

import numpy as np

from .base import EmbeddingDescriptor

DEFAULT_DIMENSION = 256
DEFAULT_SEED = 0

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace and punctuation."""
    return _TOKEN.findall(text.lower())


def token_bucket(token: str, dimension: int = DEFAULT_DIMENSION, seed: int = DEFAULT_SEED) -> int:
    # blake2b is stable across processes, unlike the builtin hash()
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, salt=seed.to_bytes(8, "little")
    ).digest()
    return int.from_bytes(digest, "little") % dimension


class HashEmbedder:
    """Hashing-trick embedder.

    Each token lands in one of ``dimension`` buckets; a sentence vector is
    the L2-normalised bucket-count vector and a token vector is the one-hot
    vector of its bucket. Two tokens are therefore either identical (cosine
    1) or orthogonal (cosine 0) unless they collide.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, seed: int = DEFAULT_SEED) -> None:
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self.seed = seed
        self.descriptor = EmbeddingDescriptor(f"hash-embed/seed={seed}", dimension)

    def bucket(self, token: str) -> int:
        return token_bucket(token, self.dimension, self.seed)

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for tok in tokenize(text):
            vec[self.bucket(tok)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]:
        tokens = tokenize(text)
        mat = np.zeros((len(tokens), self.dimension), dtype=np.float64)
        for row, tok in enumerate(tokens):
            mat[row, self.bucket(tok)] = 1.0
        return tokens, mat


_default = HashEmbedder()


def hash_embed(text: str) -> np.ndarray:
    """Embed ``text`` with the default 256-bucket embedder."""
    return _default.embed(text)
