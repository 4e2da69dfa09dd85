from __future__ import annotations

import json
from pathlib import Path

import pytest

from raevolve.catalog import load_catalog, read_catalog_dir, seed_catalog, seed_catalog_docs
from raevolve.fera import load_registry, seed_registry, seed_registry_document
from raevolve.model import new_description, seed_kinds

FIXTURES = Path(__file__).parent / "fixtures"
SCENARIOS = FIXTURES / "scenarios"
ORACLES = FIXTURES / "oracles"


@pytest.fixture
def kinds():
    return seed_kinds()


@pytest.fixture
def registry():
    return seed_registry()


@pytest.fixture
def catalog():
    return seed_catalog()


@pytest.fixture
def empty():
    return new_description("Oracle RA")


def toy_registry():
    doc = seed_registry_document()
    doc["questions"] += json.loads((SCENARIOS / "questions.extra.json").read_text())["questions"]
    return load_registry(doc)


def toy_catalog():
    guidelines, rules = seed_catalog_docs()
    extra_g, extra_r = read_catalog_dir(SCENARIOS / "catalog")
    return load_catalog(guidelines + extra_g, rules + extra_r, toy_registry())
