import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixtures import synthetic_corpus, write_corpus_file  # noqa: E402


@pytest.fixture(scope="session")
def big_corpus():
    return synthetic_corpus()


@pytest.fixture(scope="session")
def big_corpus_path(big_corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("fixture") / "corpus.jsonl"
    write_corpus_file(big_corpus, path)
    return path
