import pytest

from support import StubBackend, toy_rows, write_corpus


@pytest.fixture
def stub_backend():
    return StubBackend()


@pytest.fixture
def corpus_path(tmp_path):
    path = tmp_path / "train.jsonl"
    write_corpus(path, toy_rows(50))
    return path
