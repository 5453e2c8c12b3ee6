"""Shared helpers for the test suite: builders, toy tokenizers, fuzz scorers."""

from __future__ import annotations

import random
import zlib
from typing import Iterable, Mapping, Sequence

from absakit import (
    AspectTerm,
    Category,
    CategoryInventory,
    Example,
    Polarity,
    SentimentTuple,
    VectorScorer,
    WordTokenizer,
)
from absakit.domain import IMPLICIT_LABEL
from absakit.seqformat import A_MARKER, C_MARKER, P_MARKER, SEPARATOR

# Deliberately free of the lexicalized words ("great", "ok", "bad", "it").
WORD_POOL = [
    "alpha", "bravo", "candle", "delta", "ember", "fjord", "gala", "harbor",
    "igloo", "jungle", "kettle", "lagoon", "marble", "nectar", "onyx",
    "pepper", "quartz", "ripple", "saffron", "thistle", "umber", "velvet",
    "walnut", "yonder", "zephyr",
]

ENTITY_POOL = ["meal", "drink", "venue", "crew", "decor", "area", "menu", "counter"]
ATTRIBUTE_POOL = ["tone", "cost", "speed", "style", "size", "glow", "span", "mix"]


def make_tuple(term, category_label, polarity) -> SentimentTuple:
    """Build a tuple from label-level pieces; term None/NULL means implicit."""
    if term is None or term == IMPLICIT_LABEL:
        aspect = AspectTerm.implicit()
    else:
        aspect = AspectTerm.explicit(term)
    if isinstance(polarity, str):
        polarity = Polarity(polarity)
    return SentimentTuple(aspect, Category.from_label(category_label), polarity)


def make_example(eid, text, gold=(), language="en") -> Example:
    return Example(eid, language, text, tuple(gold))


def random_inventory(rng: random.Random, size: int) -> CategoryInventory:
    labels = set()
    while len(labels) < size:
        entity = rng.choice(ENTITY_POOL)
        attribute = rng.choice(ATTRIBUTE_POOL)
        labels.add(f"{entity.upper()}#{attribute.upper()}")
    return CategoryInventory.from_labels(sorted(labels))


def random_sentence(rng: random.Random, n_words=(3, 7)) -> str:
    count = rng.randint(*n_words)
    return " ".join(rng.choice(WORD_POOL) for _ in range(count))


def random_gold(
    rng: random.Random,
    sentence: str,
    inventory: CategoryInventory,
    max_tuples: int = 3,
) -> list[SentimentTuple]:
    """Random gold tuples whose explicit terms are sentence words."""
    words = sentence.split()
    categories = list(inventory)
    gold = []
    seen = set()
    for _ in range(rng.randint(0, max_tuples)):
        if rng.random() < 0.25:
            term = AspectTerm.implicit()
        else:
            length = rng.randint(1, min(2, len(words)))
            start = rng.randrange(0, len(words) - length + 1)
            term = AspectTerm.explicit(" ".join(words[start : start + length]))
        tup = SentimentTuple(term, rng.choice(categories), rng.choice(list(Polarity)))
        if tup not in seen:
            seen.add(tup)
            gold.append(tup)
    return gold


def corpus_tokenizer(sentences: Iterable[str], inventory: CategoryInventory,
                     extra: Iterable[str] = ()) -> WordTokenizer:
    words = []
    for cat in inventory:
        words.extend(cat.surface.split())
    words.extend(["great", "ok", "bad", "it"])
    words.extend(extra)
    return WordTokenizer.from_texts(sentences, words)


class PieceTokenizer:
    """Subword-style test tokenizer; configured words split into pieces.

    Continuation pieces end in "@@" (BPE-style), so decode can rejoin them
    without spaces.
    """

    def __init__(self, words: Sequence[str], word_pieces: Mapping[str, Sequence[str]]):
        self.word_pieces = dict(word_pieces)
        tokens = ["<unk>", "</s>"]
        seen = set(tokens)
        for word in [A_MARKER, C_MARKER, P_MARKER, SEPARATOR, *words]:
            for piece in self.word_pieces.get(word, [word]):
                if piece not in seen:
                    seen.add(piece)
                    tokens.append(piece)
        self._tokens = tokens
        self._ids = {t: i for i, t in enumerate(tokens)}

    @property
    def vocab_size(self):
        return len(self._tokens)

    @property
    def end_id(self):
        return self._ids["</s>"]

    @property
    def unk_id(self):
        return self._ids["<unk>"]

    def encode(self, text):
        ids = []
        for word in text.split():
            for piece in self.word_pieces.get(word, [word]):
                ids.append(self._ids.get(piece, self.unk_id))
        return ids

    def decode(self, ids):
        out = []
        glue = False
        for tid in ids:
            piece = self._tokens[tid]
            joined = piece.endswith("@@")
            text = piece[:-2] if joined else piece
            if glue and out:
                out[-1] += text
            else:
                out.append(text)
            glue = joined
        return " ".join(out)


class RandomScorer(VectorScorer):
    """Deterministic pseudo-random scores with a growing progress bias.

    Scores depend only on (seed, prefix). From ``ramp_start`` steps on, the
    end id and the boost ids (marker/separator first tokens) gain a bias
    that eventually dominates the random range, guaranteeing termination
    well before any generous max_len while early steps stay random. The
    end id ramps twice as fast so tuple boundaries resolve to a stop.
    """

    def __init__(self, seed: int, vocab_size: int, end_id: int,
                 boost_ids: Iterable[int] = (), ramp_start: int = 8, ramp: int = 60):
        self.seed = seed
        self.vocab_size = vocab_size
        self.end_id = end_id
        self.boost_ids = frozenset(boost_ids) - {end_id}
        self.ramp_start = ramp_start
        self.ramp = ramp

    def next_scores(self, input_ids, prefix_ids):
        key = zlib.crc32(repr((self.seed, tuple(prefix_ids))).encode())
        rng = random.Random(key)
        scores = [rng.randrange(0, 1000) for _ in range(self.vocab_size)]
        bias = max(0, len(prefix_ids) - self.ramp_start) * self.ramp
        if bias:
            for tid in self.boost_ids:
                scores[tid] += bias
            scores[self.end_id] += 2 * bias
        return scores


def grammar_boost_ids(tok) -> set[int]:
    """First token of every marker and of the separator."""
    ids = set()
    for marker in (A_MARKER, C_MARKER, P_MARKER, SEPARATOR):
        encoded = tok.encode(marker)
        if encoded:
            ids.add(encoded[0])
    return ids


def brute_force_score(predictions, golds):
    """Independent exact-match counter: pairwise scan with used-flags."""
    n_pred = n_gold = n_correct = 0
    for pred, gold in zip(predictions, golds):
        pred = list(dict.fromkeys(pred))
        gold = list(dict.fromkeys(gold))
        n_pred += len(pred)
        n_gold += len(gold)
        used = [False] * len(gold)
        for p in pred:
            for j, g in enumerate(gold):
                if not used[j] and p == g:
                    used[j] = True
                    n_correct += 1
                    break
    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1, n_pred, n_gold, n_correct
