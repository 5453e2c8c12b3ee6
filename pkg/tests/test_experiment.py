import csv
import shlex
import sys
from pathlib import Path

import pytest

from absakit import (
    Dataset,
    ExperimentConfig,
    MissingCorpusError,
    run_experiment,
    write_jsonl,
)
from absakit.experiment import (
    BRIDGE_ENV,
    BridgeUnreachableError,
    config_from_mapping,
    load_config_file,
)

from support import make_example, make_tuple

FAKE_BRIDGE = Path(__file__).resolve().parent / "fake_bridge.py"


def write_corpora(root):
    root.mkdir(parents=True, exist_ok=True)
    en_train = Dataset(
        "en",
        "train",
        tuple(
            make_example(
                f"en-{i}",
                f"The staff was helpful {i}",
                [make_tuple("staff", "SERVICE#GENERAL", "positive")],
            )
            for i in range(12)
        ),
    )
    es_train = Dataset(
        "es",
        "train",
        tuple(
            make_example(
                f"es-{i}",
                f"La comida llego tarde {i}",
                [make_tuple("comida", "FOOD#QUALITY", "negative")],
                language="es",
            )
            for i in range(8)
        ),
    )
    es_test = Dataset(
        "es",
        "test",
        (
            make_example(
                "es-t0",
                "La sopa estaba buena",
                [make_tuple("sopa", "FOOD#QUALITY", "positive")],
                language="es",
            ),
            make_example(
                "es-t1",
                "El personal fue atento",
                [make_tuple("personal", "SERVICE#GENERAL", "positive")],
                language="es",
            ),
            make_example(
                "es-t2",
                "El cafe costaba demasiado",
                [make_tuple("cafe", "DRINKS#PRICES", "negative")],
                language="es",
            ),
        ),
    )
    write_jsonl(en_train, root / "en_train.jsonl")
    write_jsonl(es_train, root / "es_train.jsonl")
    write_jsonl(es_test, root / "es_test.jsonl")
    return en_train, es_train, es_test


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def base_config(tmp_path, **overrides):
    kwargs = dict(
        task="TASD",
        source_lang="en",
        target_lang="es",
        corpus_dir=tmp_path / "corpus",
        out_dir=tmp_path / "out",
        fewshot=(0, 1, 2),
        seeds=(0, 1),
        figures=False,
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


class TestConfig:
    def test_defaults_match_protocol(self, tmp_path):
        cfg = ExperimentConfig(
            task="TASD", source_lang="en", target_lang="es",
            corpus_dir=tmp_path, out_dir=tmp_path,
        )
        assert cfg.fewshot == (0, 1, 2, 5, 10, 20, 100)
        assert len(cfg.seeds) == 5
        assert set(cfg.constrained) == {True, False}

    def test_validation(self, tmp_path):
        with pytest.raises(ValueError):
            base_config(tmp_path, fewshot=(2, 1))
        with pytest.raises(ValueError):
            base_config(tmp_path, fewshot=(-1,))
        with pytest.raises(ValueError):
            base_config(tmp_path, seeds=(1, 1))
        with pytest.raises(ValueError):
            base_config(tmp_path, scorer="magic")

    def test_config_file_and_overrides(self, tmp_path, monkeypatch):
        cfg_file = tmp_path / "sweep.cfg"
        cfg_file.write_text(
            "# comment lines are fine here\n"
            "task=TASD\n"
            "source_lang=en\n"
            "target_lang=es\n"
            f"corpus_dir={tmp_path / 'corpus'}\n"
            f"out_dir={tmp_path / 'out'}\n"
            "fewshot=0,1\n"
            "constrained=both\n"
            "seeds=0,1,2\n"
            "figures=off\n"
        )
        values = load_config_file(cfg_file)
        values["seeds"] = "7"  # CLI-style override
        monkeypatch.setenv(BRIDGE_ENV, "tcp:localhost:9999")
        cfg = config_from_mapping(values)
        assert cfg.fewshot == (0, 1)
        assert cfg.seeds == (7,)
        assert cfg.figures is False
        assert cfg.bridge_address == "tcp:localhost:9999"

    def test_bad_config_lines(self, tmp_path):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text("task TASD\n")
        with pytest.raises(ValueError):
            load_config_file(cfg_file)
        with pytest.raises(ValueError):
            config_from_mapping({"task": "TASD"})
        with pytest.raises(ValueError):
            config_from_mapping({"task": "TASD", "source_lang": "en",
                                 "target_lang": "es", "corpus_dir": "x",
                                 "out_dir": "y", "mystery": "1"})


class TestRunExperiment:
    def test_scripted_scorer_is_oracle_upper_bound(self, tmp_path):
        write_corpora(tmp_path / "corpus")
        paths = run_experiment(base_config(tmp_path))
        rows = read_rows(paths["runs"])
        # 3 counts x 2 constrained x 2 seeds
        assert len(rows) == 12
        assert all(row["status"] == "ok" for row in rows)
        assert all(float(row["f1"]) == 1.0 for row in rows)
        agg = read_rows(paths["aggregates"])
        assert all(float(row["mean_f1"]) == 1.0 for row in agg)
        assert all(row["ci_method"] == "normal-1.96" for row in agg)

    def test_adversarial_constrained_cells_win(self, tmp_path):
        write_corpora(tmp_path / "corpus")
        paths = run_experiment(base_config(tmp_path, scorer="adversarial"))
        rows = read_rows(paths["runs"])
        by_cell = {
            (row["n_fewshot"], row["constrained"], row["seed"]): float(row["f1"])
            for row in rows
        }
        for n in ("0", "1", "2"):
            for seed in ("0", "1"):
                assert by_cell[(n, "true", seed)] > by_cell[(n, "false", seed)]

    def test_missing_corpus_raises_before_cells(self, tmp_path):
        (tmp_path / "corpus").mkdir()
        with pytest.raises(MissingCorpusError):
            run_experiment(base_config(tmp_path))

    def test_failed_cells_are_flagged_and_sweep_continues(self, tmp_path):
        write_corpora(tmp_path / "corpus")  # es_train has 8 examples
        paths = run_experiment(base_config(tmp_path, fewshot=(0, 999)))
        rows = read_rows(paths["runs"])
        assert len(rows) == 8
        failed = [row for row in rows if row["status"] == "failed"]
        assert {row["n_fewshot"] for row in failed} == {"999"}
        assert all(row["error"] for row in failed)
        assert all(row["f1"] == "" for row in failed)
        ok = [row for row in rows if row["status"] == "ok"]
        assert {row["n_fewshot"] for row in ok} == {"0"}
        # aggregates only cover cells that produced scores
        agg = read_rows(paths["aggregates"])
        assert {row["n_fewshot"] for row in agg} == {"0"}

    def test_monolingual_reference_rows(self, tmp_path):
        write_corpora(tmp_path / "corpus")
        paths = run_experiment(base_config(tmp_path, monolingual=True))
        curve = read_rows(paths["curve"])
        mono = [row for row in curve if row["setting"] == "mono"]
        assert len(mono) == 2  # one per constrained flag
        assert all(row["n_fewshot"] == "" for row in mono)
        assert all(row["source_lang"] == "es" for row in mono)
        runs = read_rows(paths["runs"])
        mono_runs = [row for row in runs if row["source_lang"] == "es"]
        assert len(mono_runs) == 4  # 2 constrained x 2 seeds

    def test_workers_do_not_change_results(self, tmp_path):
        write_corpora(tmp_path / "corpus")
        first = run_experiment(base_config(tmp_path, out_dir=tmp_path / "o1"))
        second = run_experiment(
            base_config(tmp_path, out_dir=tmp_path / "o2", workers=4)
        )
        for key in ("runs", "aggregates", "errors", "curve"):
            assert Path(first[key]).read_bytes() == Path(second[key]).read_bytes()

    def test_figures_written_when_enabled(self, tmp_path):
        write_corpora(tmp_path / "corpus")
        paths = run_experiment(base_config(tmp_path, figures=True))
        assert Path(paths["curve_png"]).stat().st_size > 0
        assert Path(paths["errors_png"]).stat().st_size > 0

    def test_bridge_scorer_end_to_end(self, tmp_path):
        write_corpora(tmp_path / "corpus")
        address = (
            f"exec:{shlex.quote(sys.executable)} {shlex.quote(str(FAKE_BRIDGE))} "
            f"--corpus {shlex.quote(str(tmp_path / 'corpus' / 'es_test.jsonl'))} "
            "--task TASD"
        )
        cfg = base_config(
            tmp_path, scorer="bridge", bridge_address=address,
            fewshot=(0,), seeds=(0,),
        )
        paths = run_experiment(cfg)
        rows = read_rows(paths["runs"])
        assert all(row["status"] == "ok" for row in rows)
        assert all(float(row["f1"]) == 1.0 for row in rows)

    def test_bridge_unreachable(self, tmp_path, monkeypatch):
        write_corpora(tmp_path / "corpus")
        monkeypatch.delenv(BRIDGE_ENV, raising=False)
        with pytest.raises(BridgeUnreachableError):
            run_experiment(base_config(tmp_path, scorer="bridge"))
        with pytest.raises(BridgeUnreachableError):
            run_experiment(
                base_config(tmp_path, scorer="bridge",
                            bridge_address="tcp:127.0.0.1:1")
            )
