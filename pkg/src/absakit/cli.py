"""Command-line interface: corpus tooling, decoding, scoring, and sweeps."""

from __future__ import annotations

import json
import os
import sys
from collections import Counter
from pathlib import Path

import click

from .corpus import (
    CorpusError,
    MixRecipe,
    few_shot_mix,
    ingest_semeval,
    read_jsonl,
    stats,
    write_jsonl,
)
from .decoding import decode
from .domain import (
    DEFAULT_LEX,
    CategoryInventory,
    default_inventory,
    project,
    task_by_id,
)
from .evaluation import ErrorKind, classify_errors, micro_f1
from .experiment import (
    BRIDGE_ENV,
    BridgeUnreachableError,
    MissingCorpusError,
    config_from_mapping,
    load_config_file,
    local_scoring,
    run_experiment,
)
from .bridge_client import BridgeClient, ScorerFailureError
from .reports import ErrorCountRow, render_error_taxonomy, write_errors_csv
from .seqformat import parse_output


@click.group()
def main():
    """Marker-format structured generation toolkit for ABSA."""


def _load_inventory(path):
    return CategoryInventory.load(path) if path else default_inventory()


@main.command()
@click.option("--xml", "xml_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--language", required=True, help="ISO language code for the file.")
@click.option("--split", type=click.Choice(["train", "dev", "test"]), default="train")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def ingest(xml_path, language, split, out_path):
    """Convert review XML into the canonical JSONL corpus format."""
    try:
        dataset = ingest_semeval(
            Path(xml_path).read_bytes(), language=language, split=split
        )
    except CorpusError as err:
        raise click.ClickException(str(err))
    write_jsonl(dataset, out_path)
    sentences, tuples = stats(dataset)
    click.echo(f"wrote {out_path}: {sentences} sentences, {tuples} tuples")


@main.command("stats")
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
def stats_command(corpus):
    """Print sentence and tuple counts for a JSONL corpus."""
    dataset = read_jsonl(corpus)
    sentences, tuples = stats(dataset)
    click.echo(f"sentences={sentences} tuples={tuples}")


@main.command()
@click.option("--source", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--target", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n", type=int, required=True, help="Target-language examples to append.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def mix(source, target, n, out_path):
    """Append the first n target examples to the source training set."""
    try:
        mixed = few_shot_mix(
            MixRecipe(read_jsonl(source), read_jsonl(target), n)
        )
    except CorpusError as err:
        raise click.ClickException(str(err))
    write_jsonl(mixed, out_path)
    click.echo(f"wrote {out_path}: {len(mixed)} examples")


@main.command("decode")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--task", "task_name", required=True)
@click.option("--scorer", type=click.Choice(["scripted", "adversarial", "bridge"]),
              default="scripted", show_default=True)
@click.option("--bridge-address", default=None,
              help=f"Bridge endpoint; defaults to ${BRIDGE_ENV}.")
@click.option("--constrained/--unconstrained", default=True, show_default=True)
@click.option("--max-len", type=int, default=128, show_default=True)
@click.option("--inventory", "inventory_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def decode_command(corpus, task_name, scorer, bridge_address, constrained,
                   max_len, inventory_path, out_path):
    """Decode every sentence of a corpus and write parsed predictions."""
    task = task_by_id(task_name)
    lex = DEFAULT_LEX
    inventory = _load_inventory(inventory_path)
    dataset = read_jsonl(corpus)
    factory = None
    if scorer == "bridge":
        address = bridge_address or os.environ.get(BRIDGE_ENV)
        if not address:
            raise click.ClickException(
                f"no bridge address given (use --bridge-address or ${BRIDGE_ENV})"
            )
        try:
            tok = BridgeClient.open(address)
        except (ScorerFailureError, ValueError) as err:
            raise click.ClickException(str(err))
    else:
        tok, factory = local_scoring([dataset], task, inventory, lex, scorer)

    with open(out_path, "w", encoding="utf-8") as fh:
        for example in dataset:
            active = factory.for_example(example) if factory is not None else tok
            result = decode(
                active, tok, example.text, task,
                inventory=inventory, lex=lex,
                constrained=constrained, max_len=max_len,
            )
            labels, diagnostics = parse_output(
                result.text, task, example.text, lex, inventory
            )
            fh.write(
                json.dumps(
                    {
                        "id": example.id,
                        "output": result.text,
                        "ended": result.ended,
                        "tuples": [list(t) for t in labels],
                        "diagnostics": [
                            {
                                "kind": d.kind.value,
                                "fragment": d.fragment,
                                "position": d.position,
                            }
                            for d in diagnostics
                        ],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    click.echo(f"wrote {out_path}: {len(dataset)} predictions")


def _read_predictions(path, raw, task, gold_dataset, inventory):
    """Prediction lines are {id, tuples} or, with ``raw``, {id, output} where
    ``output`` is unparsed generated text."""
    objects = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            objects[obj["id"]] = obj
    if not raw:
        return {eid: [tuple(t) for t in obj["tuples"]] for eid, obj in objects.items()}
    predictions = {}
    by_id = {e.id: e for e in gold_dataset}
    for eid, obj in objects.items():
        sentence = by_id[eid].text if eid in by_id else ""
        labels, _ = parse_output(obj["output"], task, sentence, DEFAULT_LEX, inventory)
        predictions[eid] = labels
    return predictions


def _aligned(pred_path, gold_path, task, raw=False, inventory=None):
    gold_dataset = read_jsonl(gold_path)
    if raw and inventory is None:
        inventory = default_inventory()
    predictions = _read_predictions(pred_path, raw, task, gold_dataset, inventory)
    missing = [e.id for e in gold_dataset if e.id not in predictions]
    if missing:
        raise click.ClickException(f"predictions missing for ids: {missing[:5]} ...")
    preds = [predictions[e.id] for e in gold_dataset]
    golds = [project(e, task) for e in gold_dataset]
    return gold_dataset, preds, golds


@main.command("eval")
@click.option("--pred", "pred_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--task", "task_name", required=True)
@click.option("--raw", is_flag=True,
              help="Prediction lines carry raw generated text under 'output'.")
@click.option("--inventory", "inventory_path", type=click.Path(exists=True, dir_okay=False))
def eval_command(pred_path, gold_path, task_name, raw, inventory_path):
    """Score a prediction file against a gold corpus (exact-match micro F1)."""
    task = task_by_id(task_name)
    inventory = CategoryInventory.load(inventory_path) if inventory_path else None
    _, preds, golds = _aligned(pred_path, gold_path, task, raw=raw, inventory=inventory)
    score = micro_f1(preds, golds)
    click.echo(
        f"precision={score.precision:.6f} recall={score.recall:.6f} "
        f"f1={score.f1:.6f} "
        f"(pred={score.n_pred} gold={score.n_gold} correct={score.n_correct})"
    )


@main.command("analyze")
@click.option("--pred", "pred_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--task", "task_name", required=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def analyze_command(pred_path, gold_path, task_name, out_dir, figures):
    """Classify prediction errors and write the taxonomy report."""
    task = task_by_id(task_name)
    gold_dataset, preds, golds = _aligned(pred_path, gold_path, task)
    counts: Counter = Counter()
    for example, pred, gold in zip(gold_dataset, preds, golds):
        for record in classify_errors(pred, gold, example.text, task):
            counts[record.kind] += 1
    rows = [
        ErrorCountRow(task.id, "-", gold_dataset.language, 0, True, kind,
                      counts.get(kind, 0))
        for kind in ErrorKind
    ]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_errors_csv(out / "errors.csv", rows)
    if figures:
        render_error_taxonomy(out / "errors.png", rows)
    total = sum(counts.values())
    click.echo(f"wrote {out / 'errors.csv'}: {total} error records")


@main.command("sweep")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--task", "task_name")
@click.option("--source-lang")
@click.option("--target-lang")
@click.option("--corpus-dir", type=click.Path(file_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False))
@click.option("--fewshot", help="Comma-separated few-shot counts.")
@click.option("--constrained", help="on, off, both, or a comma list.")
@click.option("--seeds", help="Comma-separated seeds.")
@click.option("--scorer", type=click.Choice(["scripted", "adversarial", "bridge"]))
@click.option("--bridge-address", help=f"Bridge endpoint; defaults to ${BRIDGE_ENV}.")
@click.option("--monolingual/--no-monolingual", default=None)
@click.option("--inventory", type=click.Path(exists=True, dir_okay=False))
@click.option("--max-len", type=int)
@click.option("--workers", type=int)
@click.option("--figures/--no-figures", default=None)
def sweep_command(config_path, task_name, source_lang, target_lang, corpus_dir,
                  out_dir, fewshot, constrained, seeds, scorer, bridge_address,
                  monolingual, inventory, max_len, workers, figures):
    """Run the full experiment grid and write the report files.

    Values come from the config file (key=value lines); command-line flags
    override it, and the bridge address falls back to the environment.
    """
    values = load_config_file(config_path) if config_path else {}
    overrides = {
        "task": task_name,
        "source_lang": source_lang,
        "target_lang": target_lang,
        "corpus_dir": corpus_dir,
        "out_dir": out_dir,
        "fewshot": fewshot,
        "constrained": constrained,
        "seeds": seeds,
        "scorer": scorer,
        "bridge_address": bridge_address,
        "inventory": inventory,
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    if monolingual is not None:
        values["monolingual"] = "true" if monolingual else "false"
    if max_len is not None:
        values["max_len"] = str(max_len)
    if workers is not None:
        values["workers"] = str(workers)
    if figures is not None:
        values["figures"] = "true" if figures else "false"
    try:
        cfg = config_from_mapping(values)
        paths = run_experiment(cfg)
    except (ValueError, MissingCorpusError, BridgeUnreachableError) as err:
        raise click.ClickException(str(err))
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


if __name__ == "__main__":
    sys.exit(main())
