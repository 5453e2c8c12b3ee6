import csv
import json
import shutil
import time

import pytest

from absabridge import (
    DataFormatError,
    TrainConfig,
    fine_tune,
    load_backend,
)

from support import toy_rows, write_corpus


class TestTrainConfig:
    def test_protocol_defaults(self, corpus_path, tmp_path):
        cfg = TrainConfig(
            model=f"toy:{corpus_path}", task="TASD",
            train_path=corpus_path, out_dir=tmp_path / "out",
        )
        assert cfg.epochs == 20
        assert cfg.batch_size == 16
        assert cfg.learning_rate is None  # resolves to the family default

    def test_validation(self, corpus_path, tmp_path):
        with pytest.raises(ValueError):
            TrainConfig(model="toy:x", task="TASD", train_path=corpus_path,
                        out_dir=tmp_path, epochs=0)


class TestTrainingSmoke:
    def test_loss_decreases_on_50_examples(self, corpus_path, tmp_path):
        start = time.perf_counter()
        result = fine_tune(
            TrainConfig(
                model=f"toy:{corpus_path}",
                task="TASD",
                train_path=corpus_path,
                out_dir=tmp_path / "run",
                epochs=3,
                seed=0,
            )
        )
        elapsed = time.perf_counter() - start
        assert elapsed < 600, f"smoke training took {elapsed:.0f}s, budget 600s"
        assert len(result.log) == 3
        assert result.log[-1].train_loss < result.log[0].train_loss
        print(
            f"[PASS] training smoke (loss {result.log[0].train_loss:.3f} -> "
            f"{result.log[-1].train_loss:.3f}, {elapsed:.1f}s)"
        )

    def test_config_dump_and_log_written(self, corpus_path, tmp_path):
        out = tmp_path / "run"
        fine_tune(
            TrainConfig(
                model=f"toy:{corpus_path}", task="TASD",
                train_path=corpus_path, out_dir=out, epochs=2,
            )
        )
        dump = json.loads((out / "train_config.json").read_text())
        assert dump["optimizer"] == "adafactor"
        assert dump["resolved_learning_rate"] == 1e-4
        assert dump["max_source_len"] == 256 and dump["max_target_len"] == 128
        with open(out / "training_log.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [row["epoch"] for row in rows] == ["1", "2"]
        assert all(row["train_loss"] for row in rows)

    def test_checkpoint_loadable_by_serve(self, corpus_path, tmp_path):
        result = fine_tune(
            TrainConfig(
                model=f"toy:{corpus_path}", task="TASD",
                train_path=corpus_path, out_dir=tmp_path / "run", epochs=1,
            )
        )
        backend = load_backend(f"checkpoint:{result.checkpoint}")
        assert backend.vocab_size > 0
        assert 0 <= backend.end_id < backend.vocab_size
        text = "[A] sopa [C] food quality [P] great"
        assert backend.decode(backend.encode(text)) == text
        scores = backend.scores(backend.encode("la sopa [A] [C] [P]"), [])
        assert len(scores) == backend.vocab_size

    def test_malformed_jsonl_line_number(self, tmp_path):
        path = tmp_path / "train.jsonl"
        good = json.dumps(toy_rows(1)[0])
        path.write_text(good + "\n" + "{oops\n")
        with pytest.raises(DataFormatError) as err:
            fine_tune(
                TrainConfig(model=f"toy:{path}", task="TASD",
                            train_path=path, out_dir=tmp_path / "out", epochs=1)
            )
        assert ":2:" in str(err.value)


class TestDevSelection:
    @pytest.mark.skipif(
        shutil.which("absakit") is None,
        reason="evaluator CLI not on PATH",
    )
    def test_dev_f1_selection_via_evaluator_cli(self, tmp_path):
        train_path = tmp_path / "train.jsonl"
        dev_path = tmp_path / "dev.jsonl"
        write_corpus(train_path, toy_rows(20))
        write_corpus(dev_path, toy_rows(4, language="dv"))
        result = fine_tune(
            TrainConfig(
                model=f"toy:{train_path}",
                task="TASD",
                train_path=train_path,
                dev_path=dev_path,
                out_dir=tmp_path / "run",
                epochs=2,
                max_target_len=24,
            )
        )
        assert result.selection == "dev_f1"
        assert all(rec.dev_f1 is not None for rec in result.log)
        assert all(rec.dev_loss is not None for rec in result.log)
        assert sum(rec.selected for rec in result.log) == 1
        assert result.checkpoint.is_dir()
