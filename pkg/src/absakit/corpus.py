"""Corpus ingestion, the JSONL canonical store, splits, and few-shot mixes.

The import format is review XML in the SemEval-2016 layout
(Reviews/Review/sentences/sentence with <text> and optional
Opinions/Opinion nodes). The canonical interchange format is JSONL, one
example per line::

    {"id": ..., "lang": ..., "text": ...,
     "tuples": [{"term": ..., "from": ..., "to": ..., "category": ..., "polarity": ...}]}

Implicit targets are encoded as term "NULL" without offsets.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

from .domain import (
    IMPLICIT_LABEL,
    AspectTerm,
    Category,
    Example,
    Polarity,
    SentimentTuple,
)


class CorpusError(Exception):
    """Base class for corpus ingestion and selection failures."""


class MalformedXmlError(CorpusError):
    pass


class UnknownPolarityLabelError(CorpusError):
    pass


class BadSpanError(CorpusError):
    pass


class TooFewExamplesError(CorpusError):
    pass


class NTooLargeError(CorpusError):
    pass


SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class Dataset:
    """An ordered, load-stable collection of examples for one split."""

    language: str
    split: str
    examples: tuple[Example, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "examples", tuple(self.examples))
        if self.split not in SPLITS:
            raise CorpusError(f"split must be one of {SPLITS}, got {self.split!r}")
        ids = [e.id for e in self.examples]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise CorpusError(f"duplicate example id {dup!r} in dataset")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)


def stats(dataset: Dataset) -> tuple[int, int]:
    """(sentence count, gold tuple count) over the dataset."""
    return len(dataset.examples), sum(len(e.gold) for e in dataset.examples)


def ingest_semeval(
    xml_bytes: Union[bytes, str],
    *,
    language: str,
    split: str = "train",
) -> Dataset:
    """Load a review XML file into a Dataset.

    Opinion targets equal to "NULL" become implicit terms; explicit
    targets keep their character offsets after validating that the
    offsets land on the target text. Sentences without opinions yield
    empty gold sets. Any structural problem rejects the whole file with
    a location.
    """
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as err:
        raise MalformedXmlError(str(err)) from None

    examples = []
    for index, node in enumerate(root.iter("sentence")):
        sid = node.get("id") or f"s{index}"
        where = f"sentence {index} (id={sid})"
        text = node.findtext("text")
        if text is None:
            raise MalformedXmlError(f"{where}: missing <text>")
        gold = []
        opinions = node.find("Opinions")
        for op in opinions.findall("Opinion") if opinions is not None else []:
            target = op.get("target")
            cat_label = op.get("category")
            pol_label = op.get("polarity")
            if cat_label is None or pol_label is None:
                raise MalformedXmlError(f"{where}: Opinion missing category/polarity")
            try:
                polarity = Polarity(pol_label)
            except ValueError:
                raise UnknownPolarityLabelError(
                    f"{where}: polarity {pol_label!r}"
                ) from None
            try:
                category = Category.from_label(cat_label)
            except ValueError as err:
                raise MalformedXmlError(f"{where}: {err}") from None
            if target is None or target == IMPLICIT_LABEL:
                term = AspectTerm.implicit()
            else:
                span = None
                frm, to = op.get("from"), op.get("to")
                if frm is not None and to is not None:
                    try:
                        lo, hi = int(frm), int(to)
                    except ValueError:
                        raise BadSpanError(
                            f"{where}: non-integer offsets ({frm!r}, {to!r})"
                        ) from None
                    if not 0 <= lo < hi <= len(text):
                        raise BadSpanError(
                            f"{where}: offsets ({lo}, {hi}) outside the text"
                        )
                    if text[lo:hi] != target:
                        raise BadSpanError(
                            f"{where}: offsets ({lo}, {hi}) do not cover "
                            f"target {target!r}"
                        )
                    span = (lo, hi)
                try:
                    term = AspectTerm.explicit(target, span)
                except ValueError as err:
                    raise MalformedXmlError(f"{where}: {err}") from None
            gold.append(SentimentTuple(term, category, polarity))
        try:
            examples.append(Example(sid, language, text, tuple(gold)))
        except ValueError as err:
            raise MalformedXmlError(f"{where}: {err}") from None
    return Dataset(language, split, tuple(examples))


def split_dev(train: Dataset) -> tuple[Dataset, Dataset]:
    """Deterministic, order-preserving 9:1 train/dev split.

    The first ceil(0.9 * N) examples stay in train; the remainder become
    the dev set.
    """
    n = len(train.examples)
    if n < 10:
        raise TooFewExamplesError(f"need at least 10 examples to split, got {n}")
    keep = -(-9 * n // 10)  # exact integer ceil(9n/10); float 0.9*n rounds wrong
    return (
        Dataset(train.language, "train", train.examples[:keep]),
        Dataset(train.language, "dev", train.examples[keep:]),
    )


@dataclass(frozen=True)
class MixRecipe:
    """Source training set plus the first ``n_target`` target examples."""

    source: Dataset
    target: Dataset
    n_target: int

    def __post_init__(self) -> None:
        if self.source.split != "train" or self.target.split != "train":
            raise CorpusError("mixes draw from train splits only")
        if self.n_target < 0:
            raise CorpusError(f"n_target must be >= 0, got {self.n_target}")
        if self.n_target > len(self.target.examples):
            raise NTooLargeError(
                f"n_target={self.n_target} exceeds the target training set "
                f"({len(self.target.examples)} examples)"
            )


def few_shot_mix(recipe: MixRecipe) -> Dataset:
    """Append the first n target-language examples to the source set.

    Selection is file order; nothing is shuffled, so repeated runs see the
    same mixture. n_target=0 returns the source dataset unchanged.
    """
    if recipe.n_target == 0:
        return recipe.source
    examples = recipe.source.examples + recipe.target.examples[: recipe.n_target]
    language = f"{recipe.source.language}+{recipe.target.language}"
    return Dataset(language, "train", examples)


def example_to_json(example: Example) -> dict:
    tuples = []
    for tup in example.gold:
        row: dict = {"term": tup.term.label}
        if tup.term.span is not None:
            row["from"], row["to"] = tup.term.span
        row["category"] = tup.category.label
        row["polarity"] = tup.polarity.value
        tuples.append(row)
    return {
        "id": example.id,
        "lang": example.language,
        "text": example.text,
        "tuples": tuples,
    }


def example_from_json(obj: dict) -> Example:
    gold = []
    for row in obj["tuples"]:
        label = row["term"]
        if label == IMPLICIT_LABEL:
            term = AspectTerm.implicit()
        else:
            span = (row["from"], row["to"]) if "from" in row and "to" in row else None
            term = AspectTerm.explicit(label, span)
        gold.append(
            SentimentTuple(
                term, Category.from_label(row["category"]), Polarity(row["polarity"])
            )
        )
    return Example(obj["id"], obj["lang"], obj["text"], tuple(gold))


def write_jsonl(dataset: Dataset, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for example in dataset.examples:
            fh.write(json.dumps(example_to_json(example), ensure_ascii=False) + "\n")


def read_jsonl(
    path: Union[str, Path],
    *,
    split: str = "train",
    language: Optional[str] = None,
) -> Dataset:
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                examples.append(example_from_json(json.loads(line)))
            except (KeyError, TypeError, ValueError) as err:
                raise CorpusError(f"{path}:{lineno}: {err}") from None
    if language is None:
        langs = sorted({e.language for e in examples})
        language = langs[0] if len(langs) == 1 else "mul"
    return Dataset(language, split, tuple(examples))
