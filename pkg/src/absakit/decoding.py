"""Grammar-constrained greedy decoding over the marker format.

The grammar automaton tracks a position inside "marker, phrase, marker,
phrase, ... [;] ..." and exposes the token ids legal at each step: marker
and separator strings are forced through piece by piece (real subword
vocabularies split them), category and polarity phrases follow tries over
their tokenizations, and aspect-term tokens are restricted to tokens of
the input sentence plus the implicit-term word. The driver is plain greedy
decoding; with constraints on, the argmax is taken over the automaton's
allowed set, with ties broken toward the lowest token id so runs are fully
deterministic.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Iterable, Optional, Protocol, Sequence

from .domain import (
    DEFAULT_LEX,
    CategoryInventory,
    Element,
    Lexicalization,
    TaskSpec,
)
from .seqformat import ELEMENT_MARKERS, SEPARATOR, EmptySentenceError, build_input


class EmptyInventoryError(Exception):
    """Constrained decoding needs a non-empty category inventory."""


class DisallowedTokenError(Exception):
    """A token outside the allowed set was fed to the automaton."""


class TokenizerView(Protocol):
    """The tokenizer surface the decoder needs; realized by the in-process
    word tokenizer or remotely by a model bridge."""

    vocab_size: int
    end_id: int

    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: Sequence[int]) -> str: ...


class Scorer(abc.ABC):
    """Deterministic next-token choice for a fixed (input, prefix) pair."""

    @abc.abstractmethod
    def best_token(
        self,
        input_ids: Sequence[int],
        prefix_ids: Sequence[int],
        allowed: Optional[Iterable[int]] = None,
    ) -> int:
        """Highest-scoring next token, restricted to ``allowed`` when given.

        Ties must break toward the lowest token id.
        """


class VectorScorer(Scorer):
    """Scorer backed by a full per-vocabulary score vector."""

    @abc.abstractmethod
    def next_scores(
        self, input_ids: Sequence[int], prefix_ids: Sequence[int]
    ) -> Sequence[float]: ...

    def best_token(self, input_ids, prefix_ids, allowed=None):
        scores = self.next_scores(input_ids, prefix_ids)
        candidates = range(len(scores)) if allowed is None else sorted(allowed)
        best_id = None
        best = None
        for tid in candidates:
            score = scores[tid]
            if best is None or score > best:
                best_id, best = tid, score
        if best_id is None:
            raise DisallowedTokenError("empty allowed set")
        return best_id


@dataclass
class TrieNode:
    children: dict[int, "TrieNode"] = field(default_factory=dict)
    terminal: bool = False


class PhraseTrie:
    """Token-id trie over a fixed phrase set."""

    def __init__(self, phrases: Iterable[Sequence[int]] = ()):
        self.root = TrieNode()
        for phrase in phrases:
            self.add(phrase)

    def add(self, token_ids: Sequence[int]) -> None:
        if not token_ids:
            raise ValueError("cannot add an empty phrase to a trie")
        node = self.root
        for tid in token_ids:
            node = node.children.setdefault(tid, TrieNode())
        node.terminal = True


@dataclass(frozen=True)
class TermTokenSet:
    """Token ids an aspect term may be built from."""

    allowed_ids: frozenset[int]

    def __contains__(self, token_id: int) -> bool:
        return token_id in self.allowed_ids


def term_token_set(
    sentence: str,
    tok: TokenizerView,
    lex: Lexicalization = DEFAULT_LEX,
) -> TermTokenSet:
    """Tokens of the input sentence plus the implicit-term word.

    Words are encoded in isolation and with a preceding space so both
    word-initial and word-internal subword variants are covered. The
    end-of-sequence id is never a term token.
    """
    trimmed = sentence.strip()
    if not trimmed:
        raise EmptySentenceError("cannot build a term token set for an empty sentence")
    ids = set(tok.encode(trimmed))
    for word in trimmed.split():
        ids.update(tok.encode(word))
        ids.update(tok.encode(" " + word))
    ids.update(tok.encode(lex.implicit_term_word))
    ids.update(tok.encode(" " + lex.implicit_term_word))
    ids.discard(tok.end_id)
    return TermTokenSet(frozenset(ids))


class Phase(Enum):
    MARKER = auto()  # forcing the marker of elements[element_idx]
    TERM = auto()
    CATEGORY = auto()
    POLARITY = auto()
    SEPARATOR = auto()  # forcing the remaining separator pieces
    DONE = auto()


@dataclass
class DecoderState:
    """Mutable automaton position; confined to one decode call."""

    task: TaskSpec
    phase: Phase
    element_idx: int = 0
    piece_idx: int = 0  # next forced piece inside a marker/separator
    node: Optional[TrieNode] = None
    term_len: int = 0
    emitted: list[int] = field(default_factory=list)
    tuples_complete: int = 0


class MarkerGrammar:
    """Compiled marker grammar for one (task, inventory, sentence) triple.

    Immutable once built; many decodes may share it, each with its own
    DecoderState.
    """

    def __init__(
        self,
        task: TaskSpec,
        inventory: CategoryInventory,
        lex: Lexicalization,
        tok: TokenizerView,
        sentence: str,
    ):
        if inventory is None or len(inventory) == 0:
            raise EmptyInventoryError("constrained decoding needs category entries")
        self.task = task
        self.end_id = tok.end_id
        self.marker_ids = []
        for element in task.elements:
            ids = tuple(tok.encode(ELEMENT_MARKERS[element]))
            if not ids:
                raise ValueError(f"tokenizer encoded marker {element} to nothing")
            self.marker_ids.append(ids)
        self.sep_ids = tuple(tok.encode(SEPARATOR))
        if not self.sep_ids:
            raise ValueError("tokenizer encoded the separator to nothing")
        self.term_set = term_token_set(sentence, tok, lex)
        self.category_trie = PhraseTrie(tok.encode(c.surface) for c in inventory)
        self.polarity_trie = PhraseTrie(
            tok.encode(w) for w in lex.polarity_words.values()
        )

    def initial_state(self) -> DecoderState:
        return DecoderState(self.task, Phase.MARKER)

    def _exit_ids(self, state: DecoderState) -> frozenset[int]:
        """Tokens that legally leave the current element's phrase."""
        if state.element_idx + 1 < len(self.task.elements):
            return frozenset({self.marker_ids[state.element_idx + 1][0]})
        return frozenset({self.sep_ids[0], self.end_id})

    def allowed(self, state: DecoderState) -> frozenset[int]:
        phase = state.phase
        if phase is Phase.DONE:
            return frozenset()
        if phase is Phase.MARKER:
            ids = {self.marker_ids[state.element_idx][state.piece_idx]}
            if not state.emitted:
                ids.add(self.end_id)  # an empty tuple set is a legal output
            return frozenset(ids)
        if phase is Phase.SEPARATOR:
            return frozenset({self.sep_ids[state.piece_idx]})
        if phase is Phase.TERM:
            ids = set(self.term_set.allowed_ids)
            if state.term_len >= 1:  # empty terms would parse as malformed
                ids |= self._exit_ids(state)
            return frozenset(ids)
        node = state.node
        ids = set(node.children)
        if node.terminal:
            ids |= self._exit_ids(state)
        return frozenset(ids)

    def advance(self, state: DecoderState, token_id: int) -> DecoderState:
        """Consume one token; mutates and returns ``state``."""
        if token_id not in self.allowed(state):
            raise DisallowedTokenError(
                f"token {token_id} not allowed in phase {state.phase.name}"
            )
        state.emitted.append(token_id)
        phase = state.phase
        if phase is Phase.MARKER:
            if token_id == self.end_id:
                state.phase = Phase.DONE
                return state
            state.piece_idx += 1
            if state.piece_idx == len(self.marker_ids[state.element_idx]):
                self._enter_content(state)
            return state
        if phase is Phase.SEPARATOR:
            state.piece_idx += 1
            if state.piece_idx == len(self.sep_ids):
                self._start_tuple(state)
            return state
        if phase is Phase.TERM:
            # Leaving wins over copying another input token when both match.
            if state.term_len >= 1 and token_id in self._exit_ids(state):
                self._exit_element(state, token_id)
            else:
                state.term_len += 1
            return state
        # CATEGORY / POLARITY: descending the trie wins over exiting at a
        # terminal node.
        child = state.node.children.get(token_id)
        if child is not None:
            state.node = child
        else:
            self._exit_element(state, token_id)
        return state

    def _enter_content(self, state: DecoderState) -> None:
        element = self.task.elements[state.element_idx]
        state.piece_idx = 0
        if element is Element.TERM:
            state.phase = Phase.TERM
            state.term_len = 0
        elif element is Element.CATEGORY:
            state.phase = Phase.CATEGORY
            state.node = self.category_trie.root
        else:
            state.phase = Phase.POLARITY
            state.node = self.polarity_trie.root

    def _start_tuple(self, state: DecoderState) -> None:
        state.phase = Phase.MARKER
        state.element_idx = 0
        state.piece_idx = 0
        state.node = None

    def _exit_element(self, state: DecoderState, token_id: int) -> None:
        # token_id is the first piece of the next marker, of the separator,
        # or the end id (the latter two only after the final element).
        state.node = None
        if state.element_idx + 1 < len(self.task.elements):
            state.element_idx += 1
            state.phase = Phase.MARKER
            state.piece_idx = 1  # this step consumed the first marker piece
            if state.piece_idx == len(self.marker_ids[state.element_idx]):
                self._enter_content(state)
            return
        state.tuples_complete += 1
        if token_id == self.end_id:
            state.phase = Phase.DONE
            return
        state.piece_idx = 1
        if state.piece_idx == len(self.sep_ids):
            self._start_tuple(state)
        else:
            state.phase = Phase.SEPARATOR


@dataclass
class DecodeResult:
    """Outcome of one greedy decode."""

    text: str
    token_ids: list[int]  # every emitted id, including the end id when generated
    ended: bool  # False when max_len cut generation off


def decode(
    scorer: Scorer,
    tok: TokenizerView,
    sentence: str,
    task: TaskSpec,
    *,
    inventory: Optional[CategoryInventory] = None,
    lex: Lexicalization = DEFAULT_LEX,
    constrained: bool = True,
    max_len: int = 128,
) -> DecodeResult:
    """Greedy decoding of one sentence, optionally grammar-constrained.

    With ``constrained`` the per-step argmax is restricted to the
    automaton's allowed set; otherwise the automaton is never consulted.
    Generation stops at the end id or after ``max_len`` tokens (a normal
    stop, reported via ``ended``). Scorer exceptions propagate.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    input_ids = tok.encode(build_input(sentence, task))
    grammar = state = None
    if constrained:
        grammar = MarkerGrammar(task, inventory, lex, tok, sentence)
        state = grammar.initial_state()
    out: list[int] = []
    ended = False
    for _ in range(max_len):
        allowed = grammar.allowed(state) if constrained else None
        token_id = scorer.best_token(input_ids, out, allowed)
        if constrained:
            grammar.advance(state, token_id)
        out.append(token_id)
        if token_id == tok.end_id:
            ended = True
            break
    text = tok.decode(out[:-1] if ended else out)
    return DecodeResult(text=text, token_ids=out, ended=ended)
