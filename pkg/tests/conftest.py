from pathlib import Path

import numpy as np
import pytest

from sselab.corpus import Corpus, Document

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def small_corpus():
    """Six documents over a five-word vocabulary with known frequencies."""
    vocabulary = ["alpha", "beta", "gamma", "delta", "epsilon"]
    keyword_sets = [
        {0, 1},
        {0, 2},
        {0, 1, 3},
        {1},
        {0},
        {2, 4},
    ]
    docs = [Document(i, frozenset(s)) for i, s in enumerate(keyword_sets)]
    return Corpus(docs, vocabulary)
