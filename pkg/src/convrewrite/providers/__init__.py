from .base import (
    EmbeddingDescriptor,
    EmbeddingProvider,
    GenerativeModelProvider,
    ProviderDescriptor,
    is_zero,
)
from .embedding import HashEmbedder, hash_embed, tokenize, token_bucket
from .grammar import Edit, EditGrammar, EditOp, Frame, parse_question, rule_fuse
from .http import HttpProvider, HttpProviderConfig
from .mocks import FailingMock, IdentityMock, RuleFusionMock, ScriptedMock

__all__ = [
    "Edit",
    "EditGrammar",
    "EditOp",
    "EmbeddingDescriptor",
    "EmbeddingProvider",
    "FailingMock",
    "Frame",
    "GenerativeModelProvider",
    "HashEmbedder",
    "HttpProvider",
    "HttpProviderConfig",
    "IdentityMock",
    "ProviderDescriptor",
    "RuleFusionMock",
    "ScriptedMock",
    "hash_embed",
    "is_zero",
    "parse_question",
    "rule_fuse",
    "token_bucket",
    "tokenize",
]
