"""Shared fixtures: one embedded-engine executor for the whole session, and
corpus helpers."""

from __future__ import annotations

from pathlib import Path

import pytest

from plpgcheck.executor import DbTarget, Executor
from plpgcheck.parser import parse

CORPUS = Path(__file__).parent / "corpus"
SEEDS = Path(__file__).parent.parent / "seeds"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def pg() -> Executor:
    """Session-wide embedded PostgreSQL; every execution rolls back."""
    executor = Executor(DbTarget(dsn="pglite://", timeout_ms=10_000))
    yield executor
    executor.close()


@pytest.fixture(scope="session")
def pg_fingerprint(pg: Executor) -> dict:
    return pg.probe()


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text()


def parse_corpus(name: str):
    source = corpus_text(name)
    result = parse(source, name)
    assert result.ok, [d.message for d in result.diagnostics]
    return source, result


def function_source(source: str, fn) -> str:
    return source[fn.span.start_byte:fn.span.end_byte]
