"""Core data model for aspect-based sentiment tuples and task definitions.

A sentiment annotation is an (aspect term, aspect category, sentiment
polarity) triple. Compound tasks select an ordered subset of those three
elements; the lexicalization maps label values to the natural-language
phrases that appear in generated sequences ("great", "ok", "bad", "it").
"""

from __future__ import annotations

import enum
import importlib.resources
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union


class UnknownCategoryError(Exception):
    """A category phrase or label that is not in the inventory."""


class UnknownPolarityError(Exception):
    """A polarity phrase that is not one of the lexicalized polarity words."""


class InventoryCollisionError(Exception):
    """A category surface form collides with a polarity or implicit-term word."""


IMPLICIT_LABEL = "NULL"


class Polarity(enum.Enum):
    POSITIVE = "positive"
    NEUTRAL = "neutral"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class Category:
    """An ENTITY#ATTRIBUTE aspect category.

    Parts are stored lowercase. ``label`` is the canonical
    "ENTITY#ATTRIBUTE" form; ``surface`` is the "entity attribute" phrase
    used inside generated text.
    """

    entity: str
    attribute: str

    def __post_init__(self) -> None:
        for part in (self.entity, self.attribute):
            if not part:
                raise ValueError("category parts must be non-empty")
            if part != part.lower():
                raise ValueError(f"category parts must be lowercase: {part!r}")
            if "#" in part or part.split() != [part]:
                raise ValueError(
                    f"category part may not contain '#' or whitespace: {part!r}"
                )

    @property
    def label(self) -> str:
        return f"{self.entity.upper()}#{self.attribute.upper()}"

    @property
    def surface(self) -> str:
        return f"{self.entity} {self.attribute}"

    @classmethod
    def from_label(cls, label: str) -> "Category":
        entity, sep, attribute = label.strip().partition("#")
        if not sep:
            raise ValueError(f"category label must be ENTITY#ATTRIBUTE: {label!r}")
        return cls(entity.strip().lower(), attribute.strip().lower())

    @classmethod
    def from_surface(cls, surface: str) -> "Category":
        parts = surface.split()
        if len(parts) != 2:
            raise ValueError(f"category surface must be two tokens: {surface!r}")
        return cls(parts[0].lower(), parts[1].lower())


@dataclass(frozen=True)
class AspectTerm:
    """The opinion-target phrase; empty text marks an implicit target."""

    text: str = ""
    span: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        if self.text:
            if self.text != self.text.strip():
                raise ValueError(f"term text has surrounding whitespace: {self.text!r}")
            if self.text == IMPLICIT_LABEL:
                raise ValueError(f"{IMPLICIT_LABEL!r} is reserved for implicit terms")
        elif self.span is not None:
            raise ValueError("implicit terms carry no span")
        if self.span is not None:
            lo, hi = self.span
            if not 0 <= lo < hi:
                raise ValueError(f"bad span {self.span!r}")

    @classmethod
    def explicit(cls, text: str, span: Optional[tuple[int, int]] = None) -> "AspectTerm":
        if not text.strip():
            raise ValueError("explicit term text must be non-empty")
        return cls(text=text, span=span)

    @classmethod
    def implicit(cls) -> "AspectTerm":
        return cls()

    @property
    def is_implicit(self) -> bool:
        return not self.text

    @property
    def label(self) -> str:
        return IMPLICIT_LABEL if self.is_implicit else self.text


@dataclass(frozen=True)
class SentimentTuple:
    """One (aspect term, aspect category, sentiment polarity) annotation."""

    term: AspectTerm
    category: Category
    polarity: Polarity


class Element(enum.Enum):
    """A sentiment element slot, named by its marker letter."""

    TERM = "A"
    CATEGORY = "C"
    POLARITY = "P"


@dataclass(frozen=True)
class TaskSpec:
    """A compound task: which elements it predicts, in marker order."""

    id: str
    elements: tuple[Element, ...]


ACSA = TaskSpec("ACSA", (Element.CATEGORY, Element.POLARITY))
E2E = TaskSpec("E2E", (Element.TERM, Element.POLARITY))
ACTE = TaskSpec("ACTE", (Element.TERM, Element.CATEGORY))
TASD = TaskSpec("TASD", (Element.TERM, Element.CATEGORY, Element.POLARITY))

TASKS: dict[str, TaskSpec] = {t.id: t for t in (ACSA, E2E, ACTE, TASD)}
_TASK_ALIASES = {"E2E-ABSA": "E2E", "E2E_ABSA": "E2E"}


def task_by_id(name: str) -> TaskSpec:
    key = name.strip().upper()
    key = _TASK_ALIASES.get(key, key)
    try:
        return TASKS[key]
    except KeyError:
        raise ValueError(
            f"unknown task {name!r}; expected one of {sorted(TASKS)}"
        ) from None


@dataclass(frozen=True)
class Example:
    """One sentence with its gold tuple set and language tag."""

    id: str
    language: str
    text: str
    gold: tuple[SentimentTuple, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold", tuple(self.gold))
        if not self.id:
            raise ValueError("example id must be non-empty")
        if not self.language:
            raise ValueError("example language must be non-empty")
        if not self.text.strip():
            raise ValueError(f"example {self.id}: text must be non-empty")
        if len(set(self.gold)) != len(self.gold):
            raise ValueError(f"example {self.id}: duplicate gold tuples")


@dataclass(frozen=True)
class Lexicalization:
    """Label-to-phrase mapping used in generated sequences."""

    positive_word: str = "great"
    neutral_word: str = "ok"
    negative_word: str = "bad"
    implicit_term_word: str = "it"

    def __post_init__(self) -> None:
        words = (
            self.positive_word,
            self.neutral_word,
            self.negative_word,
            self.implicit_term_word,
        )
        if any(not w or w != w.strip() for w in words):
            raise ValueError("lexicalization phrases must be non-empty and trimmed")
        if len(set(words)) != len(words):
            raise ValueError("lexicalization phrases must be pairwise distinct")

    @property
    def polarity_words(self) -> dict[Polarity, str]:
        return {
            Polarity.POSITIVE: self.positive_word,
            Polarity.NEUTRAL: self.neutral_word,
            Polarity.NEGATIVE: self.negative_word,
        }

    def word_for(self, polarity: Polarity) -> str:
        return self.polarity_words[polarity]

    def polarity_for(self, word: str) -> Polarity:
        for polarity, known in self.polarity_words.items():
            if word == known:
                return polarity
        raise UnknownPolarityError(word)


DEFAULT_LEX = Lexicalization()


class CategoryInventory:
    """Ordered set of valid categories with case-insensitive surface lookup.

    When a lexicalization is given, loading verifies that no category
    surface form (or part of one) collides with a polarity word or the
    implicit-term word; such a collision would make generated phrases
    ambiguous.
    """

    def __init__(
        self,
        categories: Iterable[Category],
        lex: Optional[Lexicalization] = DEFAULT_LEX,
    ):
        self._categories: list[Category] = []
        self._by_surface: dict[str, Category] = {}
        for cat in categories:
            key = cat.surface.casefold()
            if key in self._by_surface:
                continue
            self._by_surface[key] = cat
            self._categories.append(cat)
        if lex is not None:
            reserved = {w.casefold() for w in lex.polarity_words.values()}
            reserved.add(lex.implicit_term_word.casefold())
            for cat in self._categories:
                hits = reserved & {
                    cat.surface.casefold(),
                    cat.entity.casefold(),
                    cat.attribute.casefold(),
                }
                if hits:
                    raise InventoryCollisionError(
                        f"category {cat.label} collides with lexicalized word(s) "
                        f"{sorted(hits)}"
                    )

    def __len__(self) -> int:
        return len(self._categories)

    def __iter__(self) -> Iterator[Category]:
        return iter(self._categories)

    def __contains__(self, category: Category) -> bool:
        return self._by_surface.get(category.surface.casefold()) == category

    def resolve_surface(self, phrase: str) -> Category:
        key = " ".join(phrase.split()).casefold()
        try:
            return self._by_surface[key]
        except KeyError:
            raise UnknownCategoryError(phrase) from None

    def resolve_label(self, label: str) -> Category:
        try:
            category = Category.from_label(label)
        except ValueError:
            raise UnknownCategoryError(label) from None
        if category not in self:
            raise UnknownCategoryError(label)
        return category

    @classmethod
    def from_labels(
        cls,
        labels: Iterable[str],
        lex: Optional[Lexicalization] = DEFAULT_LEX,
    ) -> "CategoryInventory":
        return cls((Category.from_label(lab) for lab in labels), lex)

    @classmethod
    def from_text(
        cls,
        text: str,
        lex: Optional[Lexicalization] = DEFAULT_LEX,
    ) -> "CategoryInventory":
        """Parse the inventory file format: one ENTITY#ATTRIBUTE per line.

        Blank lines are ignored. Comment lines are not supported because
        '#' is the label separator; a leading '#' is rejected.
        """
        labels = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                raise ValueError(
                    f"line {lineno}: lines must start with the entity name; "
                    "'#' comments are not supported"
                )
            labels.append(line)
        return cls.from_labels(labels, lex)

    @classmethod
    def load(
        cls,
        path: Union[str, Path],
        lex: Optional[Lexicalization] = DEFAULT_LEX,
    ) -> "CategoryInventory":
        return cls.from_text(Path(path).read_text("utf-8"), lex)


def default_inventory(lex: Optional[Lexicalization] = DEFAULT_LEX) -> CategoryInventory:
    """The bundled restaurant-domain category inventory."""
    text = (
        importlib.resources.files("absakit")
        .joinpath("data/restaurant_categories.txt")
        .read_text("utf-8")
    )
    return CategoryInventory.from_text(text, lex)


def lexicalize(
    tup: SentimentTuple, lex: Lexicalization = DEFAULT_LEX
) -> tuple[str, str, str]:
    """Map a tuple to its (term, category, polarity) phrase triple."""
    term_phrase = lex.implicit_term_word if tup.term.is_implicit else tup.term.text
    return term_phrase, tup.category.surface, lex.word_for(tup.polarity)


def delexicalize(
    term_phrase: str,
    category_phrase: str,
    polarity_phrase: str,
    sentence: str,
    lex: Lexicalization,
    inventory: CategoryInventory,
) -> SentimentTuple:
    """Invert :func:`lexicalize` for phrases recovered from generated text.

    The span of an explicit term is the first character-offset occurrence
    of the phrase in the sentence, or absent when it does not occur.
    Raises :class:`UnknownCategoryError` / :class:`UnknownPolarityError`
    for unresolvable phrases; both are recoverable.
    """
    category = inventory.resolve_surface(category_phrase)
    polarity = lex.polarity_for(polarity_phrase)
    if term_phrase == lex.implicit_term_word:
        term = AspectTerm.implicit()
    else:
        at = sentence.find(term_phrase)
        span = (at, at + len(term_phrase)) if at >= 0 else None
        term = AspectTerm.explicit(term_phrase, span)
    return SentimentTuple(term, category, polarity)


def element_label(tup: SentimentTuple, element: Element) -> str:
    if element is Element.TERM:
        return tup.term.label
    if element is Element.CATEGORY:
        return tup.category.label
    return tup.polarity.value


def project(example: Example, task: TaskSpec) -> list[tuple[str, ...]]:
    """Project gold tuples onto the task's elements.

    Returns label tuples in task element order (term text or NULL,
    ENTITY#ATTRIBUTE, polarity value), deduplicated with first occurrence
    kept, original order preserved.
    """
    out: list[tuple[str, ...]] = []
    seen: set[tuple[str, ...]] = set()
    for tup in example.gold:
        labels = tuple(element_label(tup, e) for e in task.elements)
        if labels not in seen:
            seen.add(labels)
            out.append(labels)
    return out
