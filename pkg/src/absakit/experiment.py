"""End-to-end experiment orchestration: mix, decode, parse, score, report.

A sweep runs one cell per (few-shot count, constrained flag, seed),
optionally plus monolingual reference cells. Cells are independent; a
failing cell is flagged in the per-run CSV and the sweep continues. With
in-process scorers the whole pipeline is deterministic, so repeated runs
of one configuration produce byte-identical CSVs.
"""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

from .bridge_client import BridgeClient, ScorerFailureError
from .corpus import Dataset, MixRecipe, few_shot_mix, read_jsonl
from .decoding import Scorer, TokenizerView, decode
from .domain import (
    DEFAULT_LEX,
    CategoryInventory,
    Example,
    TaskSpec,
    default_inventory,
    project,
    task_by_id,
)
from .evaluation import ErrorKind, aggregate, classify_errors, micro_f1
from .reports import (
    AggregateRow,
    CurveRow,
    ErrorCountRow,
    RunRow,
    render_error_taxonomy,
    render_fewshot_curve,
    write_aggregates_csv,
    write_curve_csv,
    write_errors_csv,
    write_runs_csv,
)
from .scorers import AdversarialScorer, WordTokenizer, scripted, tokenizer_for_corpus
from .seqformat import ELEMENT_MARKERS, build_target, parse_output

BRIDGE_ENV = "ABSAKIT_BRIDGE"

DEFAULT_FEWSHOT = (0, 1, 2, 5, 10, 20, 100)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)

SCORERS = ("scripted", "adversarial", "bridge")


class MissingCorpusError(Exception):
    """A required corpus file is absent; raised before any cell runs."""


class BridgeUnreachableError(Exception):
    """The configured bridge endpoint cannot be reached."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a task, a language pair, and the cell grid to cover."""

    task: str
    source_lang: str
    target_lang: str
    corpus_dir: Path
    out_dir: Path
    fewshot: tuple[int, ...] = DEFAULT_FEWSHOT
    constrained: tuple[bool, ...] = (True, False)
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    scorer: str = "scripted"
    bridge_address: Optional[str] = None
    monolingual: bool = False
    inventory_path: Optional[Path] = None
    max_len: int = 128
    workers: int = 1
    figures: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "corpus_dir", Path(self.corpus_dir))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if any(n < 0 for n in self.fewshot):
            raise ValueError("few-shot counts must be non-negative")
        if list(self.fewshot) != sorted(self.fewshot):
            raise ValueError("few-shot counts must be sorted")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.scorer not in SCORERS:
            raise ValueError(f"scorer must be one of {SCORERS}, got {self.scorer!r}")
        if not self.constrained:
            raise ValueError("at least one constrained setting is required")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def load_config_file(path: Union[str, Path]) -> dict[str, str]:
    """Line-oriented key=value configuration; '#' lines and blanks skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        values[key.strip()] = value.strip()
    return values


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"cannot parse boolean {value!r}")


def _parse_constrained(value: str) -> tuple[bool, ...]:
    lowered = value.strip().lower()
    if lowered == "both":
        return (True, False)
    flags = tuple(_parse_bool(part) for part in lowered.split(","))
    if len(set(flags)) != len(flags):
        raise ValueError(f"duplicate constrained flags in {value!r}")
    return flags


def config_from_mapping(values: dict[str, str]) -> ExperimentConfig:
    """Build a config from string values (config file and/or CLI overrides)."""
    known = {
        "task",
        "source_lang",
        "target_lang",
        "corpus_dir",
        "out_dir",
        "fewshot",
        "constrained",
        "seeds",
        "scorer",
        "bridge_address",
        "monolingual",
        "inventory",
        "max_len",
        "workers",
        "figures",
    }
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    required = ("task", "source_lang", "target_lang", "corpus_dir", "out_dir")
    missing = [key for key in required if not values.get(key)]
    if missing:
        raise ValueError(f"missing configuration keys: {missing}")
    kwargs: dict = {
        "task": values["task"],
        "source_lang": values["source_lang"],
        "target_lang": values["target_lang"],
        "corpus_dir": Path(values["corpus_dir"]),
        "out_dir": Path(values["out_dir"]),
    }
    if "fewshot" in values:
        kwargs["fewshot"] = tuple(int(n) for n in values["fewshot"].split(","))
    if "constrained" in values:
        kwargs["constrained"] = _parse_constrained(values["constrained"])
    if "seeds" in values:
        kwargs["seeds"] = tuple(int(s) for s in values["seeds"].split(","))
    if "scorer" in values:
        kwargs["scorer"] = values["scorer"]
    if "bridge_address" in values:
        kwargs["bridge_address"] = values["bridge_address"]
    if "monolingual" in values:
        kwargs["monolingual"] = _parse_bool(values["monolingual"])
    if "inventory" in values:
        kwargs["inventory_path"] = Path(values["inventory"])
    if "max_len" in values:
        kwargs["max_len"] = int(values["max_len"])
    if "workers" in values:
        kwargs["workers"] = int(values["workers"])
    if "figures" in values:
        kwargs["figures"] = _parse_bool(values["figures"])
    if kwargs.get("bridge_address") is None and os.environ.get(BRIDGE_ENV):
        kwargs["bridge_address"] = os.environ[BRIDGE_ENV]
    return ExperimentConfig(**kwargs)


def _require(path: Path) -> Path:
    if not path.is_file():
        raise MissingCorpusError(f"missing corpus file {path}")
    return path


def _distractor_word(vocab: Iterable[str]) -> str:
    """A word guaranteed to be out of every sentence and inventory."""
    existing = set(vocab)
    for i in range(len(existing) + 1):
        word = f"offvocab{i}"
        if word not in existing:
            return word
    raise AssertionError("unreachable")


@dataclass
class _Cell:
    setting: str  # "cross" | "mono"
    n_fewshot: int
    constrained: bool
    seed: int


class ScorerFactory:
    """Per-example scorers for the in-process endpoints.

    The scripted endpoint replays each example's gold target (an oracle
    upper bound). The adversarial endpoint additionally prefers an
    out-of-input word at the first content step of the target, modelling
    wrong-language or hallucinated aspect terms; the scripted token stays
    ranked second so constrained decoding can recover.
    """

    def __init__(
        self,
        kind: str,
        task: TaskSpec,
        lex,
        tok: WordTokenizer,
        distractor: Optional[str] = None,
    ):
        self.kind = kind
        self.task = task
        self.lex = lex
        self.tok = tok
        # First content token of every target follows the first marker.
        self.substitution_step = len(tok.encode(ELEMENT_MARKERS[task.elements[0]]))
        self.distractor_id: Optional[int] = None
        if kind == "adversarial":
            if distractor is None:
                raise ValueError("the adversarial endpoint needs a distractor word")
            self.distractor_id = tok.encode(distractor)[0]

    def for_example(self, example: Example) -> Scorer:
        target = build_target(example.gold, self.task, self.lex)
        base = scripted(target, self.tok)
        if self.kind == "scripted" or not base.target_ids:
            return base
        return AdversarialScorer(base, {self.substitution_step: self.distractor_id})


def local_scoring(
    datasets: Iterable[Dataset],
    task: TaskSpec,
    inventory: CategoryInventory,
    lex,
    kind: str,
) -> tuple[WordTokenizer, ScorerFactory]:
    """Tokenizer plus scorer factory for the in-process endpoints."""
    tok = tokenizer_for_corpus(datasets, inventory, lex)
    distractor = None
    if kind == "adversarial":
        distractor = _distractor_word(tok.vocab)
        tok = tokenizer_for_corpus(datasets, inventory, lex, extra_words=(distractor,))
    return tok, ScorerFactory(kind, task, lex, tok, distractor)


def run_experiment(cfg: ExperimentConfig) -> dict[str, Path]:
    """Run the configured sweep and write the report files.

    Writes runs.csv (one row per cell, failed cells flagged),
    aggregates.csv (per few-shot count and constrained flag, with the CI
    method recorded), errors.csv (taxonomy counts summed over seeds),
    curve.csv (few-shot curve points plus monolingual reference rows), and
    matching PNG figures unless figures are disabled. Returns the paths.
    """
    task = task_by_id(cfg.task)
    lex = DEFAULT_LEX
    inventory = (
        CategoryInventory.load(cfg.inventory_path, lex)
        if cfg.inventory_path
        else default_inventory(lex)
    )

    source_train = read_jsonl(
        _require(cfg.corpus_dir / f"{cfg.source_lang}_train.jsonl"),
        split="train",
        language=cfg.source_lang,
    )
    target_train = read_jsonl(
        _require(cfg.corpus_dir / f"{cfg.target_lang}_train.jsonl"),
        split="train",
        language=cfg.target_lang,
    )
    target_test = read_jsonl(
        _require(cfg.corpus_dir / f"{cfg.target_lang}_test.jsonl"),
        split="test",
        language=cfg.target_lang,
    )

    datasets = (source_train, target_train, target_test)
    scorer_factory = None
    if cfg.scorer == "bridge":
        address = cfg.bridge_address or os.environ.get(BRIDGE_ENV)
        if not address:
            raise BridgeUnreachableError(
                f"no bridge address configured (flag/config or ${BRIDGE_ENV})"
            )
        try:
            client = BridgeClient.open(address)
        except (ScorerFailureError, ValueError) as err:
            raise BridgeUnreachableError(str(err)) from None
        tok: TokenizerView = client
    else:
        tok, scorer_factory = local_scoring(datasets, task, inventory, lex, cfg.scorer)

    cells = [
        _Cell("cross", n, constrained, seed)
        for n in cfg.fewshot
        for constrained in cfg.constrained
        for seed in cfg.seeds
    ]
    if cfg.monolingual:
        cells.extend(
            _Cell("mono", 0, constrained, seed)
            for constrained in cfg.constrained
            for seed in cfg.seeds
        )

    def run_cell(cell: _Cell) -> tuple[RunRow, Counter]:
        source = cfg.source_lang if cell.setting == "cross" else cfg.target_lang
        try:
            if cell.setting == "cross":
                # Builds the training mixture the trained pipeline would see;
                # validates the count, in-process scorers need no training.
                few_shot_mix(MixRecipe(source_train, target_train, cell.n_fewshot))
            predictions, golds = [], []
            errors: Counter = Counter()
            for example in target_test.examples:
                scorer = (
                    scorer_factory.for_example(example)
                    if scorer_factory is not None
                    else tok  # the bridge client is scorer and tokenizer at once
                )
                result = decode(
                    scorer,
                    tok,
                    example.text,
                    task,
                    inventory=inventory,
                    lex=lex,
                    constrained=cell.constrained,
                    max_len=cfg.max_len,
                )
                labels, _ = parse_output(result.text, task, example.text, lex, inventory)
                gold_labels = project(example, task)
                predictions.append(labels)
                golds.append(gold_labels)
                for record in classify_errors(labels, gold_labels, example.text, task):
                    errors[record.kind] += 1
            score = micro_f1(predictions, golds)
            row = RunRow(
                task.id, source, cfg.target_lang, cell.n_fewshot,
                cell.constrained, cell.seed, score=score,
            )
            return row, errors
        except Exception as err:  # flag the cell, keep the sweep going
            row = RunRow(
                task.id, source, cfg.target_lang, cell.n_fewshot,
                cell.constrained, cell.seed, score=None, error=str(err),
            )
            return row, Counter()

    if cfg.workers > 1 and cfg.scorer != "bridge":
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(cell) for cell in cells]

    run_rows = [row for row, _ in results]
    error_totals: dict[tuple[str, int, bool], Counter] = {}
    for cell, (_, errors) in zip(cells, results):
        key = (cell.setting, cell.n_fewshot, cell.constrained)
        error_totals.setdefault(key, Counter()).update(errors)

    agg_rows: list[AggregateRow] = []
    curve_rows: list[CurveRow] = []
    for setting in ("cross", "mono") if cfg.monolingual else ("cross",):
        source = cfg.source_lang if setting == "cross" else cfg.target_lang
        counts = cfg.fewshot if setting == "cross" else (0,)
        for n in counts:
            for constrained in cfg.constrained:
                f1s = [
                    row.score.f1
                    for cell, (row, _) in zip(cells, results)
                    if cell.setting == setting
                    and cell.n_fewshot == n
                    and cell.constrained == constrained
                    and row.score is not None
                ]
                if not f1s:
                    continue
                agg = aggregate(f1s)
                agg_rows.append(
                    AggregateRow(
                        task.id, source, cfg.target_lang, n, constrained,
                        agg.n_runs, agg.mean, agg.half_width,
                    )
                )
                curve_rows.append(
                    CurveRow(
                        task.id, source, cfg.target_lang, setting, constrained,
                        n if setting == "cross" else None, agg.mean, agg.half_width,
                    )
                )

    error_rows = [
        ErrorCountRow(
            task.id,
            cfg.source_lang if setting == "cross" else cfg.target_lang,
            cfg.target_lang,
            n,
            constrained,
            kind,
            totals.get(kind, 0),
        )
        for (setting, n, constrained), totals in sorted(
            error_totals.items(), key=lambda kv: (kv[0][0], kv[0][1], not kv[0][2])
        )
        for kind in ErrorKind
    ]

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "runs": cfg.out_dir / "runs.csv",
        "aggregates": cfg.out_dir / "aggregates.csv",
        "errors": cfg.out_dir / "errors.csv",
        "curve": cfg.out_dir / "curve.csv",
    }
    write_runs_csv(paths["runs"], run_rows)
    write_aggregates_csv(paths["aggregates"], agg_rows)
    write_errors_csv(paths["errors"], error_rows)
    write_curve_csv(paths["curve"], curve_rows)
    if cfg.figures:
        title = f"{task.id} {cfg.source_lang}->{cfg.target_lang}"
        paths["curve_png"] = cfg.out_dir / "curve.png"
        paths["errors_png"] = cfg.out_dir / "errors.png"
        render_fewshot_curve(paths["curve_png"], curve_rows, title=title)
        render_error_taxonomy(paths["errors_png"], error_rows, title=title)
    return paths
