from __future__ import annotations

import sys
from pathlib import Path

import pytest

from spanmd import Page, ingest_spans

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))  # expose oracles.py


def load_fixture(name: str) -> list[Page]:
    return ingest_spans((DATA / name).read_bytes())


@pytest.fixture
def simple_pages() -> list[Page]:
    return load_fixture("fixture_simple.json")


@pytest.fixture
def column_pages() -> list[Page]:
    return load_fixture("fixture_columns.json")


@pytest.fixture
def hand_a(simple_pages) -> Page:
    return next(p for p in simple_pages if p.page_id == "hand-a")


@pytest.fixture
def hand_b(simple_pages) -> Page:
    return next(p for p in simple_pages if p.page_id == "hand-b")
