"""Model backends: next-token scoring behind a tokenizer-plus-scores surface.

A backend exposes exactly what the wire protocol needs: vocabulary size,
end-of-sequence id, encode/decode, and a per-step score vector. The
HuggingFace backend wraps any local or hub sequence-to-sequence model;
the toy spec builds the smallest possible randomly initialized model of
the T5 family with a word-level tokenizer trained on a corpus file, so
serving and fine-tuning run on CPU in seconds without any download.
"""

from __future__ import annotations

from pathlib import Path
from typing import Protocol, Sequence

from .formats import (
    A_MARKER,
    C_MARKER,
    IMPLICIT_WORD,
    P_MARKER,
    POLARITY_WORDS,
    SEPARATOR,
    read_corpus,
)


class ModelLoadError(Exception):
    """The requested model cannot be constructed or loaded."""


class Backend(Protocol):
    vocab_size: int
    end_id: int

    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: Sequence[int]) -> str: ...

    def scores(self, input_ids: Sequence[int], prefix_ids: Sequence[int]) -> Sequence[float]: ...


def restricted_argmax(scores: Sequence[float], allowed: Sequence[int]) -> int:
    """Argmax over ``allowed``, ties toward the lowest id.

    Must bit-match the driving client's masked argmax rule, which is why
    it is one tiny function with its own differential test.
    """
    best_id = None
    best = None
    for tid in sorted(allowed):
        score = scores[tid]
        if best is None or score > best:
            best_id, best = tid, score
    if best_id is None:
        raise ValueError("empty allowed set")
    return best_id


def topk(scores: Sequence[float], k: int) -> list[tuple[int, float]]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return [(i, float(scores[i])) for i in order[:k]]


def build_word_tokenizer(texts: Sequence[str]):
    """Word-level fast tokenizer over corpus words, markers, and the
    lexicalized words; reversible on its vocabulary."""
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import WhitespaceSplit
    from transformers import PreTrainedTokenizerFast

    words = ["<pad>", "</s>", "<unk>", A_MARKER, C_MARKER, P_MARKER, SEPARATOR]
    seen = set(words)
    for text in (*texts, " ".join(POLARITY_WORDS.values()), IMPLICIT_WORD):
        for word in text.split():
            if word not in seen:
                seen.add(word)
                words.append(word)
    vocab = {word: i for i, word in enumerate(words)}
    tokenizer = Tokenizer(WordLevel(vocab, unk_token="<unk>"))
    tokenizer.pre_tokenizer = WhitespaceSplit()
    return PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        pad_token="<pad>",
        eos_token="</s>",
        unk_token="<unk>",
    )


class HFBackend:
    """Sequence-to-sequence model behind the backend surface.

    Scoring runs the full decoder per step with the encoder output cached
    for the active input context (one context per session at a time), so
    repeated steps over one sentence do not re-encode it.
    """

    def __init__(self, model, tokenizer, device: str = "cpu"):
        import torch

        self.model = model.to(device).eval()
        self.tokenizer = tokenizer
        self.device = device
        self._torch = torch
        self.vocab_size = model.config.vocab_size
        self.end_id = tokenizer.eos_token_id
        if self.end_id is None:
            raise ModelLoadError("tokenizer has no end-of-sequence token")
        self._start_id = model.config.decoder_start_token_id
        if self._start_id is None:
            self._start_id = model.config.pad_token_id
        if self._start_id is None:
            raise ModelLoadError("model defines no decoder start token")
        self._cached_input: tuple[int, ...] = ()
        self._cached_encoding = None

    def encode(self, text: str) -> list[int]:
        return list(self.tokenizer.encode(text, add_special_tokens=False))

    def decode(self, ids: Sequence[int]) -> str:
        return self.tokenizer.decode(list(ids), skip_special_tokens=True)

    def _encoder_output(self, input_ids: Sequence[int]):
        key = tuple(input_ids)
        if key != self._cached_input or self._cached_encoding is None:
            tensor = self._torch.tensor([list(key)], device=self.device)
            with self._torch.no_grad():
                self._cached_encoding = self.model.get_encoder()(input_ids=tensor)
            self._cached_input = key
        return self._cached_encoding

    def scores(self, input_ids, prefix_ids):
        torch = self._torch
        encoder_outputs = self._encoder_output(input_ids)
        decoder_ids = torch.tensor(
            [[self._start_id, *prefix_ids]], device=self.device
        )
        with torch.no_grad():
            outputs = self.model(
                encoder_outputs=encoder_outputs, decoder_input_ids=decoder_ids
            )
            logprobs = torch.log_softmax(outputs.logits[0, -1, :], dim=-1)
        return logprobs.tolist()


def toy_model_and_tokenizer(corpus_path, seed: int = 0):
    """Smallest-footprint T5-family model over a corpus-derived vocabulary."""
    import torch
    from transformers import T5Config, T5ForConditionalGeneration

    rows = read_corpus(corpus_path)
    surfaces = sorted(
        {
            tup["category"].replace("#", " ").lower()
            for row in rows
            for tup in row["tuples"]
        }
    )
    tokenizer = build_word_tokenizer([*(row["text"] for row in rows), *surfaces])
    torch.manual_seed(seed)
    config = T5Config(
        vocab_size=len(tokenizer),
        d_model=64,
        d_ff=128,
        d_kv=16,
        num_layers=2,
        num_heads=4,
        pad_token_id=tokenizer.pad_token_id,
        eos_token_id=tokenizer.eos_token_id,
        decoder_start_token_id=tokenizer.pad_token_id,
    )
    return T5ForConditionalGeneration(config), tokenizer


def load_backend(spec: str, device: str = "cpu") -> HFBackend:
    """Build a backend from a model spec.

    * ``hf:<model id or path>``: pretrained weights via transformers
      (mT5/mBART variants and anything else seq2seq).
    * ``toy:<corpus.jsonl>``: tiny randomly initialized T5-family model
      with a corpus-built word tokenizer.
    * ``checkpoint:<dir>``: a directory written by fine-tuning or
      ``save_pretrained``.
    """
    kind, _, rest = spec.partition(":")
    try:
        if kind == "toy":
            if not rest:
                raise ModelLoadError("toy spec needs a corpus path: toy:<corpus.jsonl>")
            model, tokenizer = toy_model_and_tokenizer(rest)
        elif kind in ("hf", "checkpoint"):
            from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

            if not rest:
                raise ModelLoadError(f"{kind} spec needs a model id or path")
            tokenizer = AutoTokenizer.from_pretrained(rest)
            model = AutoModelForSeq2SeqLM.from_pretrained(rest)
        else:
            raise ModelLoadError(f"unsupported model spec {spec!r}")
    except ModelLoadError:
        raise
    except Exception as err:  # transformers raises a small zoo here
        raise ModelLoadError(f"cannot load {spec!r}: {err}") from None
    return HFBackend(model, tokenizer, device=device)
