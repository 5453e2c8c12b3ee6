"""Shared helpers for the bridge test suite."""

from __future__ import annotations

import json
import random
import zlib
from pathlib import Path

GOLDEN_DIR = Path(__file__).resolve().parent.parent.parent / "docs" / "golden"


def stub_scores(vocab_size, input_ids, prefix_ids):
    key = zlib.crc32(repr((tuple(input_ids), tuple(prefix_ids))).encode())
    rng = random.Random(key)
    return [rng.uniform(-10.0, 0.0) for _ in range(vocab_size)]


class StubBackend:
    """Deterministic non-model backend for protocol tests.

    Scores depend only on (input_ids, prefix_ids); encode/decode is a
    fixed word table. Small enough that tests can recompute everything.
    """

    WORDS = ["<pad>", "</s>", "<unk>", "[A]", "[C]", "[P]", "[;]",
             "sopa", "buena", "it", "great", "ok", "bad",
             "food", "quality", "service", "general"]

    def __init__(self):
        self.vocab_size = len(self.WORDS)
        self.end_id = 1
        self._ids = {w: i for i, w in enumerate(self.WORDS)}

    def encode(self, text):
        return [self._ids.get(w, 2) for w in text.split()]

    def decode(self, ids):
        return " ".join(self.WORDS[i] for i in ids)

    def scores(self, input_ids, prefix_ids):
        return stub_scores(self.vocab_size, input_ids, prefix_ids)


def write_corpus(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def toy_rows(n, language="es"):
    """Synthetic corpus rows in the documented JSONL schema."""
    texts = [
        "la sopa estaba muy buena",
        "el personal fue atento",
        "el cafe costaba demasiado",
        "la sala era ruidosa",
        "volveremos sin duda",
        "la carta ofrece variedad",
    ]
    categories = ["FOOD#QUALITY", "SERVICE#GENERAL", "DRINKS#PRICES",
                  "AMBIENCE#GENERAL", "RESTAURANT#GENERAL"]
    polarities = ["positive", "negative", "neutral"]
    rows = []
    for i in range(n):
        text = f"{texts[i % len(texts)]} {i}"
        term = text.split()[1]
        rows.append(
            {
                "id": f"{language}-{i}",
                "lang": language,
                "text": text,
                "tuples": [
                    {
                        "term": term if i % 4 else "NULL",
                        "category": categories[i % len(categories)],
                        "polarity": polarities[i % len(polarities)],
                    }
                ],
            }
        )
    return rows
