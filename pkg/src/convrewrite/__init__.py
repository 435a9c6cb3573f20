"""Conversational query rewriting and query fusion.

The rewrite procedure builds a context window from the conversation,
renders an application prompt and asks a generative model for a
self-contained question. Two presets ship: ``QUERY_REWRITE`` (the last
five raw turns with responses) and ``QUERY_FUSION`` (only the previous
rewrite, chained turn by turn).
"""

from .core import (
    PRESETS,
    QUERY_FUSION,
    QUERY_REWRITE,
    Context,
    ContextItem,
    ConversationSession,
    HistorySource,
    PromptTemplate,
    RewriteConfig,
    Turn,
    WindowBound,
    project_history,
    session_append,
)
from .datasets import (
    AnnotatedQuestion,
    Conversation,
    Dataset,
    DatasetStats,
    DeclaredStats,
    SyntheticProfile,
    TaskType,
    compute_stats,
    generate_synthetic,
    load_dataset,
    save_dataset,
    validate_dataset,
)
from .engine import (
    RewriteOutcome,
    advance_fusion_session,
    advance_session,
    build_context,
    replay,
    rewrite,
)
from .errors import (
    ConvRewriteError,
    DimensionMismatch,
    EmptyQuery,
    IndexGap,
    MissingRewrittenHistory,
    NonPositiveBaseline,
    NoScriptMatch,
    ParseError,
    ProviderError,
    ProviderErrorKind,
    SchemaError,
    UnknownPlaceholder,
    ValidationError,
)
from .evaluation import EvalReport, build_report, load_score_fixture, render_table, run_eval
from .gate import FixedGate, GateDecision, HeuristicGate, ModelGate, RationaleTag, classify_needs_rewrite
from .metrics import BertScore, QuestionScore, bert_f1, cosine_similarity, relative_gain, score_question
from .prompts import TemplateRegistry, builtin_templates, render_prompt
from .providers import (
    HashEmbedder,
    HttpProvider,
    HttpProviderConfig,
    IdentityMock,
    RuleFusionMock,
    ScriptedMock,
    hash_embed,
    rule_fuse,
)

__version__ = "0.1.0"
