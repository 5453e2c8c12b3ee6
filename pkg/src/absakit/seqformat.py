"""Marker-format serialization of tuple lists and tolerant parsing of model text.

Target wire format, one generated line per sentence::

    [A] staff [C] service general [P] great [;] [A] menu [C] food quality [P] bad

Each tuple is the task's markers in task order, each followed by its phrase;
tuples join with the "[;]" separator, and a sentence with no tuples
serializes to the empty string. The same markers, with empty slots, are
appended to the model input to cue the expected output shape. Markers are
plain text, not reserved vocabulary entries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

from .domain import (
    IMPLICIT_LABEL,
    CategoryInventory,
    Element,
    Lexicalization,
    SentimentTuple,
    TaskSpec,
    UnknownCategoryError,
    UnknownPolarityError,
    lexicalize,
)

A_MARKER = "[A]"
C_MARKER = "[C]"
P_MARKER = "[P]"
SEPARATOR = "[;]"

ELEMENT_MARKERS: dict[Element, str] = {
    Element.TERM: A_MARKER,
    Element.CATEGORY: C_MARKER,
    Element.POLARITY: P_MARKER,
}


class EmptySentenceError(Exception):
    """The input sentence is empty after trimming."""


class DiagnosticKind(enum.Enum):
    UNKNOWN_CATEGORY = "UnknownCategory"
    UNKNOWN_POLARITY = "UnknownPolarity"
    MISSING_ELEMENT = "MissingElement"
    STRAY_TEXT = "StrayText"
    EMPTY_TERM = "EmptyTerm"


@dataclass(frozen=True)
class ParseDiagnostic:
    """A recoverable problem found while parsing generated text.

    ``position`` is the index of the offending tuple segment. For
    MISSING_ELEMENT the fragment is the missing marker literal; for the
    other kinds it is the offending substring of the parsed text.
    """

    kind: DiagnosticKind
    fragment: str
    position: int


def build_input(sentence: str, task: TaskSpec) -> str:
    """Append the task's empty markers to the (trimmed) sentence."""
    trimmed = sentence.strip()
    if not trimmed:
        raise EmptySentenceError("cannot build an input sequence from an empty sentence")
    return " ".join([trimmed, *(ELEMENT_MARKERS[e] for e in task.elements)])


def build_target(
    tuples: Iterable[SentimentTuple],
    task: TaskSpec,
    lex: Lexicalization,
) -> str:
    """Serialize tuples into the marker target format.

    Only the task's elements are emitted; segments that become identical
    after projection are dropped (first occurrence kept), matching the set
    semantics of exact-match scoring. An empty tuple list yields "".
    """
    segments: list[str] = []
    seen: set[str] = set()
    for tup in tuples:
        term_phrase, category_phrase, polarity_phrase = lexicalize(tup, lex)
        phrase = {
            Element.TERM: term_phrase,
            Element.CATEGORY: category_phrase,
            Element.POLARITY: polarity_phrase,
        }
        segment = " ".join(f"{ELEMENT_MARKERS[e]} {phrase[e]}" for e in task.elements)
        if segment not in seen:
            seen.add(segment)
            segments.append(segment)
    return f" {SEPARATOR} ".join(segments)


def _marker_occurrences(segment: str, task: TaskSpec) -> list[tuple[int, int, Element]]:
    """All task-marker occurrences in a segment, sorted by position."""
    found: list[tuple[int, int, Element]] = []
    for element in task.elements:
        marker = ELEMENT_MARKERS[element]
        start = segment.find(marker)
        while start != -1:
            found.append((start, start + len(marker), element))
            start = segment.find(marker, start + len(marker))
    found.sort()
    return found


def parse_output(
    text: str,
    task: TaskSpec,
    sentence: str,
    lex: Lexicalization,
    inventory: CategoryInventory,
) -> tuple[list[tuple[str, ...]], list[ParseDiagnostic]]:
    """Parse generated text back into per-task label tuples.

    Never raises on malformed input; problems surface as diagnostics.
    Recovery rules: text before a segment's first marker is reported as
    stray and ignored; a segment missing a required element, or carrying
    an unknown category/polarity or an empty term, is reported and dropped;
    duplicate tuples are deduplicated silently. Segment order is preserved.
    When a marker repeats within a segment, the first occurrence wins.
    """
    tuples: list[tuple[str, ...]] = []
    seen: set[tuple[str, ...]] = set()
    diagnostics: list[ParseDiagnostic] = []
    if not text.strip():
        return tuples, diagnostics

    for position, segment in enumerate(text.split(SEPARATOR)):
        found = _marker_occurrences(segment, task)
        lead = segment[: found[0][0]] if found else segment
        if lead.strip():
            diagnostics.append(
                ParseDiagnostic(DiagnosticKind.STRAY_TEXT, lead.strip(), position)
            )
        phrases: dict[Element, str] = {}
        for i, (start, end, element) in enumerate(found):
            until = found[i + 1][0] if i + 1 < len(found) else len(segment)
            if element not in phrases:
                phrases[element] = segment[end:until].strip()
        missing = [e for e in task.elements if e not in phrases]
        if missing:
            diagnostics.extend(
                ParseDiagnostic(
                    DiagnosticKind.MISSING_ELEMENT, ELEMENT_MARKERS[e], position
                )
                for e in missing
            )
            continue

        labels: list[str] = []
        dropped = False
        for element in task.elements:
            phrase = phrases[element]
            if element is Element.TERM:
                if phrase == lex.implicit_term_word:
                    labels.append(IMPLICIT_LABEL)
                elif not phrase:
                    diagnostics.append(
                        ParseDiagnostic(DiagnosticKind.EMPTY_TERM, "", position)
                    )
                    dropped = True
                    break
                else:
                    labels.append(phrase)
            elif element is Element.CATEGORY:
                try:
                    labels.append(inventory.resolve_surface(phrase).label)
                except UnknownCategoryError:
                    diagnostics.append(
                        ParseDiagnostic(
                            DiagnosticKind.UNKNOWN_CATEGORY, phrase, position
                        )
                    )
                    dropped = True
                    break
            else:
                try:
                    labels.append(lex.polarity_for(phrase).value)
                except UnknownPolarityError:
                    diagnostics.append(
                        ParseDiagnostic(
                            DiagnosticKind.UNKNOWN_POLARITY, phrase, position
                        )
                    )
                    dropped = True
                    break
        if dropped:
            continue
        labelled = tuple(labels)
        if labelled not in seen:
            seen.add(labelled)
            tuples.append(labelled)
    return tuples, diagnostics
