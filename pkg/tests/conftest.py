from pathlib import Path

import pytest

from absakit import DEFAULT_LEX, CategoryInventory

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "docs" / "golden"

FIXTURE_LABELS = [
    "SERVICE#GENERAL",
    "FOOD#QUALITY",
    "DRINKS#PRICES",
    "RESTAURANT#GENERAL",
    "RESTAURANT#MISCELLANEOUS",
    "AMBIENCE#GENERAL",
]


@pytest.fixture
def lex():
    return DEFAULT_LEX


@pytest.fixture
def inventory():
    return CategoryInventory.from_labels(FIXTURE_LABELS)


@pytest.fixture
def golden_dir():
    return GOLDEN_DIR
