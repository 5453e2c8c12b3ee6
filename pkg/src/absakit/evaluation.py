"""Exact-match micro-F1 scoring, multi-run aggregation, and error taxonomy.

A predicted tuple counts only when every element matches the gold label
form exactly: term text (case-sensitive, NULL for implicit targets),
ENTITY#ATTRIBUTE category, polarity value. Category case-insensitivity is
handled upstream, where parsing canonicalizes surface forms against the
inventory.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from difflib import SequenceMatcher
from statistics import fmean, stdev
from typing import Iterable, Optional, Sequence

from .domain import IMPLICIT_LABEL, TASD, Element, TaskSpec


class LengthMismatchError(Exception):
    """Prediction and gold lists cover different example counts."""


class EmptyScoresError(Exception):
    """Nothing to aggregate."""


Z_95 = 1.96  # normal-approximation 95% critical value
CI_METHOD = "normal-1.96"  # recorded in reports so a t-based re-analysis is possible

LabelTuple = tuple[str, ...]


@dataclass(frozen=True)
class RunScore:
    """Micro precision/recall/F1 with the counts behind them."""

    precision: float
    recall: float
    f1: float
    n_pred: int
    n_gold: int
    n_correct: int

    @classmethod
    def from_counts(cls, n_pred: int, n_gold: int, n_correct: int) -> "RunScore":
        precision = n_correct / n_pred if n_pred else 0.0
        recall = n_correct / n_gold if n_gold else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision, recall, f1, n_pred, n_gold, n_correct)


def micro_f1(
    predictions: Sequence[Iterable[LabelTuple]],
    golds: Sequence[Iterable[LabelTuple]],
) -> RunScore:
    """Pooled exact-match scoring over aligned per-example tuple sets.

    Tuples are compared as sets within each example (duplicates collapse),
    and the integer counts are pooled before any division.
    """
    if len(predictions) != len(golds):
        raise LengthMismatchError(
            f"{len(predictions)} prediction sets vs {len(golds)} gold sets"
        )
    n_pred = n_gold = n_correct = 0
    for pred, gold in zip(predictions, golds):
        pred_set, gold_set = set(pred), set(gold)
        n_pred += len(pred_set)
        n_gold += len(gold_set)
        n_correct += len(pred_set & gold_set)
    return RunScore.from_counts(n_pred, n_gold, n_correct)


@dataclass(frozen=True)
class Aggregate:
    """Mean score over runs with a 95% confidence half-width."""

    mean: float
    half_width: float
    n_runs: int


def aggregate(scores: Sequence[float]) -> Aggregate:
    """Mean and 1.96 * s / sqrt(n) half-width (sample std, n-1 denominator)."""
    if not scores:
        raise EmptyScoresError("no scores to aggregate")
    n = len(scores)
    if n == 1:
        return Aggregate(float(scores[0]), 0.0, 1)
    return Aggregate(fmean(scores), Z_95 * stdev(scores) / n**0.5, n)


class ErrorKind(enum.Enum):
    MISSING = "Missing"
    SPURIOUS = "Spurious"
    TERM_NOT_IN_INPUT = "TermNotInInput"
    TERM_PARTIAL_OVERLAP = "TermPartialOverlap"
    TERM_TYPO_LIKE = "TermTypoLike"
    CATEGORY_CONFUSION = "CategoryConfusion"
    POLARITY_CONFUSION = "PolarityConfusion"
    MULTI_ELEMENT = "MultiElement"


@dataclass(frozen=True)
class ErrorRecord:
    kind: ErrorKind
    pred: Optional[LabelTuple] = None
    gold: Optional[LabelTuple] = None

    def __post_init__(self) -> None:
        if self.kind is ErrorKind.MISSING and self.pred is not None:
            raise ValueError("Missing records carry no prediction")
        if self.kind is ErrorKind.SPURIOUS and self.gold is not None:
            raise ValueError("Spurious records carry no gold tuple")


TYPO_DISTANCE = 0.34  # max normalized edit distance for a typo-like term

_PUNCT = ".,;:!?\"'()[]"


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def _normalized_distance(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    return levenshtein(a, b) / longest if longest else 0.0


def _dedup(items: Iterable[LabelTuple]) -> list[LabelTuple]:
    out: list[LabelTuple] = []
    seen: set[LabelTuple] = set()
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def _sentence_words(sentence: str) -> set[str]:
    return {w.strip(_PUNCT).casefold() for w in sentence.split()} - {""}


def _classify_term(pred_term: str, sentence_words: set[str]) -> ErrorKind:
    if pred_term == IMPLICIT_LABEL:
        # Implicit predicted where the gold target is explicit.
        return ErrorKind.TERM_NOT_IN_INPUT
    lowered = pred_term.casefold()
    distances = [_normalized_distance(lowered, w) for w in sentence_words]
    if distances and 0 < min(distances) <= TYPO_DISTANCE:
        return ErrorKind.TERM_TYPO_LIKE
    if not any(w in sentence_words for w in lowered.split()):
        return ErrorKind.TERM_NOT_IN_INPUT
    return ErrorKind.TERM_PARTIAL_OVERLAP


def classify_errors(
    pred: Iterable[LabelTuple],
    gold: Iterable[LabelTuple],
    sentence: str,
    task: TaskSpec = TASD,
) -> list[ErrorRecord]:
    """Advisory error taxonomy over one example's predicted vs gold tuples.

    Exact matches are removed first. Leftovers are greedily aligned by
    term character overlap, then category, then polarity agreement; only
    pairs with some agreement align. Each aligned pair is labelled by what
    differs (two or more differing elements collapse to MultiElement);
    unaligned predictions become Spurious, unaligned golds Missing. The
    labels never feed scoring.
    """
    preds = _dedup(pred)
    golds = _dedup(gold)
    gold_set = set(golds)
    pred_set = set(preds)
    pred_left = [t for t in preds if t not in gold_set]
    gold_left = [t for t in golds if t not in pred_set]

    slot = {element: i for i, element in enumerate(task.elements)}

    def similarity(p: LabelTuple, g: LabelTuple) -> tuple[float, ...]:
        parts: list[float] = []
        if Element.TERM in slot:
            i = slot[Element.TERM]
            parts.append(SequenceMatcher(None, p[i], g[i]).ratio())
        if Element.CATEGORY in slot:
            i = slot[Element.CATEGORY]
            parts.append(1.0 if p[i] == g[i] else 0.0)
        if Element.POLARITY in slot:
            i = slot[Element.POLARITY]
            parts.append(1.0 if p[i] == g[i] else 0.0)
        return tuple(parts)

    candidates = []
    for i, p in enumerate(pred_left):
        for j, g in enumerate(gold_left):
            sim = similarity(p, g)
            if any(part > 0 for part in sim):
                candidates.append((tuple(-part for part in sim), i, j))
    candidates.sort()

    words = _sentence_words(sentence)
    records: list[ErrorRecord] = []
    used_pred: set[int] = set()
    used_gold: set[int] = set()
    for _, i, j in candidates:
        if i in used_pred or j in used_gold:
            continue
        used_pred.add(i)
        used_gold.add(j)
        p, g = pred_left[i], gold_left[j]
        diffs = [e for e in task.elements if p[slot[e]] != g[slot[e]]]
        if len(diffs) >= 2:
            kind = ErrorKind.MULTI_ELEMENT
        elif diffs[0] is Element.CATEGORY:
            kind = ErrorKind.CATEGORY_CONFUSION
        elif diffs[0] is Element.POLARITY:
            kind = ErrorKind.POLARITY_CONFUSION
        else:
            kind = _classify_term(p[slot[Element.TERM]], words)
        records.append(ErrorRecord(kind, pred=p, gold=g))
    for i, p in enumerate(pred_left):
        if i not in used_pred:
            records.append(ErrorRecord(ErrorKind.SPURIOUS, pred=p))
    for j, g in enumerate(gold_left):
        if j not in used_gold:
            records.append(ErrorRecord(ErrorKind.MISSING, gold=g))
    return records
