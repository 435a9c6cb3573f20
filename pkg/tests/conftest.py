import hashlib

import pytest

from convrewrite import HashEmbedder
from convrewrite.fixtures import table1_dataset_path


def reference_bucket(token: str, dimension: int = 256, seed: int = 0) -> int:
    """Bucket computed straight from hashlib, independent of the package."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, salt=seed.to_bytes(8, "little")).digest()
    return int.from_bytes(digest, "little") % dimension


def assert_collision_free(tokens):
    buckets = [reference_bucket(t) for t in tokens]
    assert len(set(buckets)) == len(buckets), dict(zip(tokens, buckets))


@pytest.fixture
def embedder():
    return HashEmbedder()


@pytest.fixture
def table1_path():
    return table1_dataset_path()


# Acceptance lines are collected here and echoed in the terminal summary so
# they show up in the test log even with output capture on.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
