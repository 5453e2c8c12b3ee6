"""Marker wire format and corpus JSONL schema, as consumed by the bridge.

These mirror the formats documented by the toolkit this bridge serves
(see docs/format.md in the parent repository); the bridge talks to it
only through files and the line protocol, so the small builders live
here rather than being imported.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union


class DataFormatError(Exception):
    """A corpus line does not follow the JSONL schema."""


A_MARKER = "[A]"
C_MARKER = "[C]"
P_MARKER = "[P]"
SEPARATOR = "[;]"

TASK_MARKERS = {
    "ACSA": (C_MARKER, P_MARKER),
    "E2E": (A_MARKER, P_MARKER),
    "ACTE": (A_MARKER, C_MARKER),
    "TASD": (A_MARKER, C_MARKER, P_MARKER),
}

POLARITY_WORDS = {"positive": "great", "neutral": "ok", "negative": "bad"}
IMPLICIT_TERM = "NULL"
IMPLICIT_WORD = "it"


def task_markers(task: str) -> tuple[str, ...]:
    try:
        return TASK_MARKERS[task.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown task {task!r}") from None


def build_input(sentence: str, task: str) -> str:
    return " ".join([sentence.strip(), *task_markers(task)])


def _phrases(row: dict) -> dict[str, str]:
    term = row["term"]
    category = row["category"]
    polarity = row["polarity"]
    return {
        A_MARKER: IMPLICIT_WORD if term == IMPLICIT_TERM else term,
        C_MARKER: category.replace("#", " ").lower(),
        P_MARKER: POLARITY_WORDS[polarity],
    }


def build_target(tuples: list[dict], task: str) -> str:
    markers = task_markers(task)
    segments = []
    for row in tuples:
        phrases = _phrases(row)
        segment = " ".join(f"{m} {phrases[m]}" for m in markers)
        if segment not in segments:
            segments.append(segment)
    return f" {SEPARATOR} ".join(segments)


def read_corpus(path: Union[str, Path]) -> list[dict]:
    """Corpus JSONL rows: {id, lang, text, tuples:[{term, category, polarity, ...}]}."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataFormatError(f"{path}:{lineno}: {err}") from None
            for key in ("id", "text", "tuples"):
                if key not in row:
                    raise DataFormatError(f"{path}:{lineno}: missing field {key!r}")
            for tup in row["tuples"]:
                for key in ("term", "category", "polarity"):
                    if key not in tup:
                        raise DataFormatError(
                            f"{path}:{lineno}: tuple missing field {key!r}"
                        )
                if tup["polarity"] not in POLARITY_WORDS:
                    raise DataFormatError(
                        f"{path}:{lineno}: unknown polarity {tup['polarity']!r}"
                    )
            rows.append(row)
    return rows


def corpus_pairs(rows: list[dict], task: str) -> list[tuple[str, str, str]]:
    """(example id, input text, target text) triples for training/decoding."""
    return [
        (row["id"], build_input(row["text"], task), build_target(row["tuples"], task))
        for row in rows
    ]
