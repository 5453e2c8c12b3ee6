"""In-process tokenizer and deterministic scorers for driver-level testing.

Scores are small integers so the argmax is platform-exact; nothing on this
path touches an ML runtime. The scripted scorer replays a fixed token
sequence, the adversarial one plants wrong-token preferences at chosen
steps to imitate generation errors (out-of-input words, wrong-language
terms) that constrained decoding is meant to repair.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .corpus import Dataset
from .decoding import VectorScorer
from .domain import DEFAULT_LEX, CategoryInventory, Lexicalization
from .seqformat import A_MARKER, C_MARKER, P_MARKER, SEPARATOR


class UnencodableTargetError(Exception):
    """The scripted target contains out-of-vocabulary words."""


class BadSubstitutionStepError(Exception):
    """A substitution step index or token id is invalid."""


UNK_TOKEN = "<unk>"
END_TOKEN = "</s>"
CONTROL_TOKENS = (UNK_TOKEN, END_TOKEN)
MARKER_TOKENS = (A_MARKER, C_MARKER, P_MARKER, SEPARATOR)


class WordTokenizer:
    """Whitespace tokenizer over a fixed vocabulary.

    Reversible on its vocabulary; unknown words map to one dedicated id.
    Control tokens come first so marker and word ids stay stable for a
    given word order.
    """

    def __init__(self, words: Iterable[str]):
        tokens = list(CONTROL_TOKENS)
        seen = set(tokens)
        for word in words:
            if word and word not in seen:
                seen.add(word)
                tokens.append(word)
        self._tokens = tokens
        self._ids = {t: i for i, t in enumerate(tokens)}

    @classmethod
    def from_texts(
        cls, texts: Iterable[str], extra_words: Iterable[str] = ()
    ) -> "WordTokenizer":
        words: list[str] = list(MARKER_TOKENS)
        for text in texts:
            words.extend(text.split())
        words.extend(extra_words)
        return cls(words)

    @property
    def vocab_size(self) -> int:
        return len(self._tokens)

    @property
    def vocab(self) -> tuple[str, ...]:
        return tuple(self._tokens)

    @property
    def unk_id(self) -> int:
        return self._ids[UNK_TOKEN]

    @property
    def end_id(self) -> int:
        return self._ids[END_TOKEN]

    def token(self, token_id: int) -> str:
        return self._tokens[token_id]

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def encode(self, text: str) -> list[int]:
        unk = self.unk_id
        return [self._ids.get(word, unk) for word in text.split()]

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self._tokens[i] for i in ids)


def tokenizer_for_corpus(
    datasets: Iterable[Dataset],
    inventory: CategoryInventory,
    lex: Lexicalization = DEFAULT_LEX,
    extra_words: Iterable[str] = (),
) -> WordTokenizer:
    """Vocabulary covering corpus sentences, category surfaces, and the
    lexicalized words, so every gold target encodes without unknowns."""
    texts = [e.text for d in datasets for e in d.examples]
    extras: list[str] = []
    for cat in inventory:
        extras.extend(cat.surface.split())
    extras.extend(lex.polarity_words.values())
    extras.append(lex.implicit_term_word)
    extras.extend(extra_words)
    return WordTokenizer.from_texts(texts, extras)


class ScriptedScorer(VectorScorer):
    """Ranks a fixed token script first, then end-of-sequence.

    While the prefix matches the script, the next scripted id scores
    strictly highest; off script, or once the script is exhausted, the end
    id does. Everything else sits at the baseline (or at the off-script
    penalty once derailed).
    """

    PREFERRED = 2

    def __init__(
        self,
        target_ids: Sequence[int],
        end_id: int,
        vocab_size: int,
        off_script_penalty: int = -1,
    ):
        self.target_ids = list(target_ids)
        self.end_id = end_id
        self.vocab_size = vocab_size
        self.off_script_penalty = off_script_penalty

    def next_scores(self, input_ids, prefix_ids):
        k = len(prefix_ids)
        on_script = k < len(self.target_ids) and list(prefix_ids) == self.target_ids[:k]
        if on_script:
            scores = [0] * self.vocab_size
            scores[self.target_ids[k]] = self.PREFERRED
        else:
            scores = [self.off_script_penalty] * self.vocab_size
            scores[self.end_id] = self.PREFERRED
        return scores


def scripted(target_text: str, tok: WordTokenizer) -> ScriptedScorer:
    """Scorer whose greedy output is exactly ``target_text`` then end."""
    ids = tok.encode(target_text)
    unk = getattr(tok, "unk_id", None)
    if unk is not None and unk in ids:
        raise UnencodableTargetError(
            f"target contains out-of-vocabulary words: {target_text!r}"
        )
    return ScriptedScorer(ids, tok.end_id, tok.vocab_size)


class AdversarialScorer(VectorScorer):
    """A scripted scorer with planted wrong-token preferences.

    At each substituted step the wrong id ranks first and the scripted id
    second; every other step scores identically to the base scorer.
    """

    PREFERRED = ScriptedScorer.PREFERRED + 1

    def __init__(self, base: ScriptedScorer, substitutions: Mapping[int, int]):
        for step, wrong in substitutions.items():
            if not 0 <= step < len(base.target_ids):
                raise BadSubstitutionStepError(f"step {step} is outside the script")
            if not 0 <= wrong < base.vocab_size:
                raise BadSubstitutionStepError(
                    f"token {wrong} is outside the vocabulary"
                )
            if wrong == base.target_ids[step]:
                raise BadSubstitutionStepError(
                    f"step {step} substitutes the scripted token with itself"
                )
        self.base = base
        self.substitutions = dict(substitutions)

    def next_scores(self, input_ids, prefix_ids):
        scores = list(self.base.next_scores(input_ids, prefix_ids))
        wrong = self.substitutions.get(len(prefix_ids))
        if wrong is not None:
            scores[wrong] = self.PREFERRED
        return scores
