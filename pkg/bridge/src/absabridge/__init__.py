"""Serve multilingual sequence-to-sequence models behind the scorer wire
protocol, and fine-tune them on marker-format pairs."""

from .backend import (
    Backend,
    HFBackend,
    ModelLoadError,
    build_word_tokenizer,
    load_backend,
    restricted_argmax,
    topk,
    toy_model_and_tokenizer,
)
from .formats import (
    DataFormatError,
    build_input,
    build_target,
    corpus_pairs,
    read_corpus,
    task_markers,
)
from .protocol import BridgeServer, serve_stdio, serve_stream, serve_tcp
from .training import EpochRecord, TrainConfig, TrainResult, fine_tune

__version__ = "0.1.0"
