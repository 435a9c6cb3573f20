"""Bundled reference data: the ten-turn analytics conversation and score fixtures."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .providers.mocks import ScriptedMock

#: (user input, fused rewrite) for each turn of the reference conversation
TABLE1: tuple[tuple[str, str], ...] = (
    ("compare monthly revenue by country", "compare monthly revenue by country"),
    ("yearly", "compare yearly revenue by country"),
    ("show it as a line chart", "compare yearly revenue by country as line chart"),
    ("now change to marketing channel", "compare yearly revenue by marketing channel as line chart"),
    ("what about month over month as bar", "compare month over month revenue by marketing channel as bar"),
    ("replace with pageviews", "compare month over month pageviews by marketing channel as bar"),
    ("show top-3", "compare month over month pageviews by top-3 marketing channels as bar"),
    ("what about top-5", "compare month over month pageviews by top-5 marketing channels as bar"),
    ("show only this month", "compare this month pageviews by top-5 marketing channels as bar"),
    ("add revenue", "compare this month pageviews and revenue by top-5 marketing channels as bar"),
)

TABLE1_INPUTS = tuple(q for q, _ in TABLE1)
TABLE1_REWRITES = tuple(r for _, r in TABLE1)

#: aggregate (cosine, BERT F1) per dataset and approach that the score fixtures reproduce
REPORTED_AGGREGATES = {
    "text_qa": {
        "query_fusion": (0.826, 0.751),
        "query_rewrite": (0.859, 0.828),
        "query_rewrite+gate": (0.871, 0.859),
    },
    "text_to_vis_long": {
        "query_fusion": (0.820, 0.773),
        "query_rewrite": (0.760, 0.734),
        "query_rewrite+gate": (0.769, 0.740),
    },
    "text_to_vis_short": {
        "query_fusion": (0.925, 0.856),
        "query_rewrite": (0.857, 0.837),
    },
}

TASK_LABELS = {
    "text_qa": "Text-based Q&A",
    "text_to_vis_long": "Text-to-Vis (long conv.)",
    "text_to_vis_short": "Text-to-Vis (short conv.)",
}


def data_path(name: str) -> Path:
    return Path(str(resources.files("convrewrite") / "data" / name))


def table1_dataset_path() -> Path:
    return data_path("table1.manifest.json")


def score_fixture_path(dataset: str) -> Path:
    return data_path(f"scores_{dataset}.json")


def table1_scripted_mock() -> ScriptedMock:
    """Canned fusion outputs for the reference conversation.

    Each entry fires only when the prompt carries both the previous rewrite
    and the current input, so it also checks what the engine put in the
    context.
    """
    script = [((f"Current question: {TABLE1_INPUTS[0]}\n", "(none)"), TABLE1_REWRITES[0])]
    for t in range(1, len(TABLE1)):
        matcher = (f"[-1] User: {TABLE1_REWRITES[t - 1]}\n", f"Current question: {TABLE1_INPUTS[t]}\n")
        script.append((matcher, TABLE1_REWRITES[t]))
    return ScriptedMock(script, strict=True, name="table1-scripted")
