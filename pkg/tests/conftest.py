from functools import lru_cache

import numpy as np
import pytest

from smer_impact.corpus import Document
from smer_impact.embedding import EmbeddingModel, SkipgramConfig, train_skipgram
from smer_impact.evaluation import SplitSpec, split
from smer_impact.models import EmbeddingPredictor, LinearClassifier, TrainConfig, embedding_matrix, train_lr
from smer_impact.synthetic import planted_corpus

# acceptance results, printed once at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def doc(tokens, doi="d", year=2020, citations=None):
    if isinstance(tokens, str):
        tokens = tokens.split()
    return Document(doi, tuple(tokens), year, citations or {})


def random_model(n_words=500, dim=50, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    words = [f"w{i:05d}" for i in range(n_words)]
    return EmbeddingModel(words, rng.normal(scale=scale, size=(n_words, dim)))


def random_classifier(dim=50, seed=0, scale=1.0):
    rng = np.random.default_rng(seed + 10_000)
    return LinearClassifier(float(rng.normal()), rng.normal(scale=scale, size=dim))


@lru_cache(maxsize=None)
def planted_run(seed: int, dim: int = 100):
    """Planted corpus -> skip-gram vectors -> 80/20 split -> ridge LR, cached per seed."""
    pc = planted_corpus(seed=seed)
    model = train_skipgram(pc.documents, SkipgramConfig(dim=dim, seed=seed + 1))
    train, test = split(pc.documents, SplitSpec("random", {2019, 2020}, pc.cit_year, seed=seed))
    clf = train_lr(embedding_matrix(model, [ld.doc for ld in train]), [ld.y for ld in train], TrainConfig())
    return {"corpus": pc, "model": model, "train": train, "test": test, "clf": clf,
            "predict": EmbeddingPredictor(clf, model)}


@pytest.fixture(scope="session")
def planted():
    return planted_run(0)


@pytest.fixture(scope="session")
def small_planted():
    pc = planted_corpus(n_docs=300, n_novel_docs=10, seed=3)
    model = train_skipgram(pc.documents, SkipgramConfig(dim=20, epochs=3, seed=5))
    train, test = split(pc.documents, SplitSpec("random", {2019, 2020}, pc.cit_year, seed=1))
    clf = train_lr(embedding_matrix(model, [ld.doc for ld in train]), [ld.y for ld in train], TrainConfig())
    return {"corpus": pc, "model": model, "train": train, "test": test, "clf": clf,
            "predict": EmbeddingPredictor(clf, model)}
