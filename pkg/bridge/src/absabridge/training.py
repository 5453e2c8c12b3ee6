"""Fine-tuning on marker-format pairs with per-family defaults.

The loss is the standard negative log-likelihood over target tokens
(mean per token, padding ignored). Family defaults: T5-family models use
Adafactor at 1e-4, BART-family models AdamW at 1e-5; epochs default to 20
with batch size 16. Model selection prefers dev micro-F1 computed by
piping raw dev decodes through the evaluator CLI of the toolkit this
bridge serves; when that CLI (or a dev set) is unavailable it falls back
to dev loss, then to the last epoch.
"""

from __future__ import annotations

import csv
import json
import math
import os
import shutil
import subprocess
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

from .backend import HFBackend, ModelLoadError, load_backend, toy_model_and_tokenizer
from .formats import DataFormatError, corpus_pairs, read_corpus

EVALUATOR_ENV = "ABSAKIT_CLI"  # overrides the evaluator executable name
EVALUATOR_DEFAULT = "absakit"

T5_FAMILIES = {"t5", "mt5", "longt5", "umt5"}
BART_FAMILIES = {"bart", "mbart"}


@dataclass
class TrainConfig:
    """Hyperparameters and paths for one fine-tuning run.

    ``learning_rate`` of None resolves to the family default (1e-4 for the
    T5 family under Adafactor, 1e-5 for the BART family under AdamW).
    Warmup and weight decay are not used; source/target length caps are
    recorded here so every run's dump is auditable.
    """

    model: str  # backend spec: hf:<id>, toy:<corpus.jsonl>, checkpoint:<dir>
    task: str
    train_path: Union[str, Path]
    out_dir: Union[str, Path]
    dev_path: Optional[Union[str, Path]] = None
    epochs: int = 20
    batch_size: int = 16
    learning_rate: Optional[float] = None
    seed: int = 0
    max_source_len: int = 256
    max_target_len: int = 128
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: Optional[float] = None
    dev_f1: Optional[float] = None
    selected: bool = False


@dataclass
class TrainResult:
    checkpoint: Path  # the retained (best) checkpoint
    last_checkpoint: Path
    log: list[EpochRecord] = field(default_factory=list)
    selection: str = "last"  # dev_f1 | dev_loss | last | divergence


def _family(model) -> str:
    return getattr(model.config, "model_type", "")


def _make_optimizer(model, learning_rate):
    """Family-default optimizer; explicit learning rates override."""
    family = _family(model)
    if family in BART_FAMILIES:
        from torch.optim import AdamW

        return AdamW(model.parameters(), lr=learning_rate or 1e-5), "adamw"
    # T5-family default; also the fallback for unknown seq2seq families.
    from transformers.optimization import Adafactor

    return (
        Adafactor(
            model.parameters(),
            lr=learning_rate or 1e-4,
            scale_parameter=False,
            relative_step=False,
            warmup_init=False,
        ),
        "adafactor",
    )


def _batches(items, size):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _encode_batch(tokenizer, inputs, targets, cfg, device):
    import torch

    enc = tokenizer(
        list(inputs),
        padding=True,
        truncation=True,
        max_length=cfg.max_source_len,
        return_tensors="pt",
    )
    with_target = tokenizer(
        list(targets),
        padding=True,
        truncation=True,
        max_length=cfg.max_target_len,
        return_tensors="pt",
    )
    labels = with_target.input_ids.clone()
    labels[labels == tokenizer.pad_token_id] = -100
    return (
        enc.input_ids.to(device),
        enc.attention_mask.to(device),
        labels.to(device),
    )


def _target_with_eos(tokenizer, target: str) -> str:
    # Word-level training tokenizers carry no post-processor, so the
    # end-of-sequence token is appended textually.
    return f"{target} {tokenizer.eos_token}".strip()


def _mean_loss(model, tokenizer, pairs, cfg, device) -> float:
    import torch

    model.eval()
    total, batches = 0.0, 0
    with torch.no_grad():
        for batch in _batches(pairs, cfg.batch_size):
            inputs = [p[1] for p in batch]
            targets = [_target_with_eos(tokenizer, p[2]) for p in batch]
            input_ids, mask, labels = _encode_batch(
                tokenizer, inputs, targets, cfg, device
            )
            loss = model(
                input_ids=input_ids, attention_mask=mask, labels=labels
            ).loss
            total += float(loss)
            batches += 1
    return total / max(batches, 1)


def _greedy_decode(backend: HFBackend, input_text: str, max_len: int) -> str:
    input_ids = backend.encode(input_text)
    out: list[int] = []
    for _ in range(max_len):
        scores = backend.scores(input_ids, out)
        best = max(range(len(scores)), key=lambda i: (scores[i], -i))
        if best == backend.end_id:
            break
        out.append(best)
    return backend.decode(out)


def _evaluator_command() -> Optional[str]:
    candidate = os.environ.get(EVALUATOR_ENV, EVALUATOR_DEFAULT)
    return candidate if shutil.which(candidate) else None


def _dev_f1_via_evaluator(
    evaluator: str, backend: HFBackend, dev_rows, cfg
) -> Optional[float]:
    """Raw dev decodes scored by the toolkit CLI; None when scoring fails."""
    with tempfile.TemporaryDirectory(prefix="absabridge-dev-") as tmp:
        pred_path = Path(tmp) / "dev_raw.jsonl"
        from .formats import build_input

        with open(pred_path, "w", encoding="utf-8") as fh:
            for row in dev_rows:
                text = _greedy_decode(
                    backend, build_input(row["text"], cfg.task), cfg.max_target_len
                )
                fh.write(json.dumps({"id": row["id"], "output": text}) + "\n")
        result = subprocess.run(
            [
                evaluator, "eval",
                "--pred", str(pred_path),
                "--gold", str(cfg.dev_path),
                "--task", cfg.task,
                "--raw",
            ],
            capture_output=True,
            text=True,
        )
        if result.returncode != 0:
            return None
        for token in result.stdout.split():
            if token.startswith("f1="):
                return float(token[3:])
    return None


def fine_tune(cfg: TrainConfig) -> TrainResult:
    """Fine-tune the configured model on marker-format pairs.

    Writes ``checkpoint-best`` (the retained checkpoint), ``checkpoint-last``,
    ``training_log.csv``, and ``train_config.json`` under ``cfg.out_dir``.
    Non-finite loss aborts the run and keeps the last finite-loss
    checkpoint.
    """
    import torch

    torch.manual_seed(cfg.seed)
    train_rows = read_corpus(cfg.train_path)
    if not train_rows:
        raise DataFormatError(f"{cfg.train_path}: no training examples")
    train_pairs = corpus_pairs(train_rows, cfg.task)
    dev_rows = read_corpus(cfg.dev_path) if cfg.dev_path else []
    dev_pairs = corpus_pairs(dev_rows, cfg.task) if dev_rows else []

    kind, _, rest = cfg.model.partition(":")
    if kind == "toy":
        model, tokenizer = toy_model_and_tokenizer(rest or str(cfg.train_path),
                                                   seed=cfg.seed)
    else:
        backend = load_backend(cfg.model, device=cfg.device)
        model, tokenizer = backend.model, backend.tokenizer
    model = model.to(cfg.device)
    optimizer, optimizer_name = _make_optimizer(model, cfg.learning_rate)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    best_dir = out_dir / "checkpoint-best"
    last_dir = out_dir / "checkpoint-last"

    dump = asdict(cfg)
    dump.update(
        {
            "train_path": str(cfg.train_path),
            "dev_path": str(cfg.dev_path) if cfg.dev_path else None,
            "out_dir": str(out_dir),
            "optimizer": optimizer_name,
            "resolved_learning_rate": cfg.learning_rate
            or (1e-5 if _family(model) in BART_FAMILIES else 1e-4),
            "model_family": _family(model),
        }
    )
    (out_dir / "train_config.json").write_text(json.dumps(dump, indent=2) + "\n")

    evaluator = _evaluator_command() if dev_rows else None
    records: list[EpochRecord] = []
    best_key = None
    selection = "last"
    diverged = False

    def save(directory):
        model.save_pretrained(directory)
        tokenizer.save_pretrained(directory)

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        total, batches = 0.0, 0
        for batch in _batches(train_pairs, cfg.batch_size):
            inputs = [p[1] for p in batch]
            targets = [_target_with_eos(tokenizer, p[2]) for p in batch]
            input_ids, mask, labels = _encode_batch(
                tokenizer, inputs, targets, cfg, cfg.device
            )
            loss = model(input_ids=input_ids, attention_mask=mask, labels=labels).loss
            loss_value = float(loss.detach())
            if not math.isfinite(loss_value):
                diverged = True
                break
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss_value
            batches += 1
        if diverged:
            selection = "divergence"
            break
        record = EpochRecord(epoch=epoch, train_loss=total / max(batches, 1))
        if dev_pairs:
            record.dev_loss = _mean_loss(model, tokenizer, dev_pairs, cfg, cfg.device)
            if evaluator is not None:
                scoring_backend = HFBackend(model, tokenizer, device=cfg.device)
                record.dev_f1 = _dev_f1_via_evaluator(
                    evaluator, scoring_backend, dev_rows, cfg
                )
        records.append(record)
        save(last_dir)
        # Selection preference: dev F1, then dev loss, then last epoch.
        if record.dev_f1 is not None:
            key, mode = record.dev_f1, "dev_f1"
            better = best_key is None or key > best_key
        elif record.dev_loss is not None:
            key, mode = -record.dev_loss, "dev_loss"
            better = best_key is None or key > best_key
        else:
            key, mode = float(epoch), "last"
            better = True
        if better:
            best_key = key
            selection = mode
            save(best_dir)
            for rec in records:
                rec.selected = rec is record

    if not records:
        raise DataFormatError("training diverged before completing one epoch")
    if not best_dir.exists():
        save(best_dir)
    if not last_dir.exists():
        save(last_dir)

    log_path = out_dir / "training_log.csv"
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "dev_loss", "dev_f1", "selected"])
        for rec in records:
            writer.writerow(
                [
                    rec.epoch,
                    f"{rec.train_loss:.6f}",
                    "" if rec.dev_loss is None else f"{rec.dev_loss:.6f}",
                    "" if rec.dev_f1 is None else f"{rec.dev_f1:.6f}",
                    "true" if rec.selected else "false",
                ]
            )
    return TrainResult(
        checkpoint=best_dir, last_checkpoint=last_dir, log=records, selection=selection
    )
