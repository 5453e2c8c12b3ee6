"""Delimited report files and companion figures for experiment runs.

The CSVs are the canonical outputs and are written deterministically
(fixed column order, fixed float formatting, no timestamps) so identical
runs produce byte-identical files. Figures are rendered next to them as a
convenience view of the same rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from .evaluation import CI_METHOD, ErrorKind, RunScore

PathLike = Union[str, Path]


def _pyplot():
    # Imported lazily: only the figure paths need matplotlib.
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


@dataclass(frozen=True)
class RunRow:
    """One sweep cell; ``score`` is None when the cell failed."""

    task: str
    source_lang: str
    target_lang: str
    n_fewshot: int
    constrained: bool
    seed: int
    score: Optional[RunScore] = None
    error: str = ""


@dataclass(frozen=True)
class AggregateRow:
    task: str
    source_lang: str
    target_lang: str
    n_fewshot: int
    constrained: bool
    n_runs: int
    mean_f1: float
    ci_half_width: float


@dataclass(frozen=True)
class ErrorCountRow:
    task: str
    source_lang: str
    target_lang: str
    n_fewshot: int
    constrained: bool
    kind: ErrorKind
    count: int


@dataclass(frozen=True)
class CurveRow:
    """One point of the few-shot curve; monolingual reference rows carry
    setting="mono" and no few-shot count."""

    task: str
    source_lang: str
    target_lang: str
    setting: str  # "cross" | "mono"
    constrained: bool
    n_fewshot: Optional[int]
    mean_f1: float
    ci_half_width: float


def _fmt_bool(flag: bool) -> str:
    return "true" if flag else "false"


def _fmt_float(value: float) -> str:
    return f"{value:.6f}"


def write_runs_csv(path: PathLike, rows: Sequence[RunRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "task",
                "source_lang",
                "target_lang",
                "n_fewshot",
                "constrained",
                "seed",
                "precision",
                "recall",
                "f1",
                "status",
                "error",
            ]
        )
        for row in rows:
            score = row.score
            writer.writerow(
                [
                    row.task,
                    row.source_lang,
                    row.target_lang,
                    row.n_fewshot,
                    _fmt_bool(row.constrained),
                    row.seed,
                    _fmt_float(score.precision) if score else "",
                    _fmt_float(score.recall) if score else "",
                    _fmt_float(score.f1) if score else "",
                    "ok" if score else "failed",
                    row.error,
                ]
            )


def write_aggregates_csv(path: PathLike, rows: Sequence[AggregateRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "task",
                "source_lang",
                "target_lang",
                "n_fewshot",
                "constrained",
                "n_runs",
                "mean_f1",
                "ci_half_width",
                "ci_method",
            ]
        )
        for row in rows:
            writer.writerow(
                [
                    row.task,
                    row.source_lang,
                    row.target_lang,
                    row.n_fewshot,
                    _fmt_bool(row.constrained),
                    row.n_runs,
                    _fmt_float(row.mean_f1),
                    _fmt_float(row.ci_half_width),
                    CI_METHOD,
                ]
            )


def write_errors_csv(path: PathLike, rows: Sequence[ErrorCountRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "task",
                "source_lang",
                "target_lang",
                "n_fewshot",
                "constrained",
                "kind",
                "count",
            ]
        )
        for row in rows:
            writer.writerow(
                [
                    row.task,
                    row.source_lang,
                    row.target_lang,
                    row.n_fewshot,
                    _fmt_bool(row.constrained),
                    row.kind.value,
                    row.count,
                ]
            )


def write_curve_csv(path: PathLike, rows: Sequence[CurveRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "task",
                "source_lang",
                "target_lang",
                "setting",
                "constrained",
                "n_fewshot",
                "mean_f1",
                "ci_half_width",
            ]
        )
        for row in rows:
            writer.writerow(
                [
                    row.task,
                    row.source_lang,
                    row.target_lang,
                    row.setting,
                    _fmt_bool(row.constrained),
                    "" if row.n_fewshot is None else row.n_fewshot,
                    _fmt_float(row.mean_f1),
                    _fmt_float(row.ci_half_width),
                ]
            )


def render_fewshot_curve(path: PathLike, rows: Sequence[CurveRow], title: str = "") -> None:
    """Few-shot curve: mean F1 vs example count, constrained on/off, with
    dashed monolingual reference lines when present."""
    plt = _pyplot()
    cross = [r for r in rows if r.setting == "cross" and r.n_fewshot is not None]
    mono = [r for r in rows if r.setting == "mono"]
    counts = sorted({r.n_fewshot for r in cross})
    positions = {n: i for i, n in enumerate(counts)}

    fig, ax = plt.subplots(figsize=(6, 4))
    styles = {
        True: dict(color="tab:red", marker="o", label="constrained"),
        False: dict(color="tab:blue", marker="^", label="unconstrained"),
    }
    for constrained in (True, False):
        points = sorted(
            (r for r in cross if r.constrained is constrained),
            key=lambda r: r.n_fewshot,
        )
        if not points:
            continue
        xs = [positions[r.n_fewshot] for r in points]
        ys = [r.mean_f1 for r in points]
        errs = [r.ci_half_width for r in points]
        ax.errorbar(xs, ys, yerr=errs, capsize=3, **styles[constrained])
    mono_styles = {
        True: dict(color="tab:orange", linestyle="--", label="constrained (mono)"),
        False: dict(color="tab:green", linestyle=":", label="unconstrained (mono)"),
    }
    for row in mono:
        ax.axhline(row.mean_f1, **mono_styles[row.constrained])
    ax.set_xticks(range(len(counts)))
    ax.set_xticklabels([str(n) for n in counts])
    ax.set_xlabel("target-language examples in training")
    ax.set_ylabel("micro F1")
    if title:
        ax.set_title(title)
    ax.grid(True, linestyle=":", linewidth=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_error_taxonomy(
    path: PathLike, rows: Sequence[ErrorCountRow], title: str = ""
) -> None:
    """Bar chart of error counts per kind, constrained vs not."""
    plt = _pyplot()
    kinds = [k.value for k in ErrorKind]
    totals: dict[bool, dict[str, int]] = {True: {}, False: {}}
    for row in rows:
        bucket = totals[row.constrained]
        bucket[row.kind.value] = bucket.get(row.kind.value, 0) + row.count

    fig, ax = plt.subplots(figsize=(7, 4))
    xs = range(len(kinds))
    width = 0.4
    ax.bar(
        [x - width / 2 for x in xs],
        [totals[True].get(k, 0) for k in kinds],
        width,
        label="constrained",
        color="tab:red",
    )
    ax.bar(
        [x + width / 2 for x in xs],
        [totals[False].get(k, 0) for k in kinds],
        width,
        label="unconstrained",
        color="tab:blue",
    )
    ax.set_xticks(list(xs))
    ax.set_xticklabels(kinds, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
