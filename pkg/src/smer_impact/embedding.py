"""Skip-gram word embeddings with negative sampling, word2vec text I/O,
document averaging and cosine queries.

Training follows the classic word2vec recipe: a randomly shrunk context
window, negatives drawn from the unigram distribution raised to 0.75, and a
learning rate decaying linearly to ``1e-4`` of its initial value. The random
stream is the word2vec linear congruential generator, so runs with the same
seed and ``workers=1`` are bit-identical across platforms.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np

from .corpus import Document
from .errors import DataError, EmptyDocumentError, NumericError, OOVError

log = logging.getLogger(__name__)

_TABLE_SIZE = 1_000_000
# weights are kept inside [-_BOUND, _BOUND]; ordinary training never gets close,
# but it keeps every vector finite whatever the learning rate
_BOUND = 1e4


@dataclass(frozen=True)
class SkipgramConfig:
    dim: int = 100
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_count: int = 1
    seed: int = 1
    workers: int = 1

    def __post_init__(self):
        for name in ("dim", "window", "negatives", "epochs", "min_count", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


class EmbeddingModel:
    """Vocabulary plus one ``dim``-dimensional vector per word.

    The vector matrix is made read-only so a model can be shared between
    threads.
    """

    def __init__(self, words: Sequence[str], vectors):
        vectors = np.array(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(words) or vectors.shape[1] < 1:
            raise DataError(f"vector matrix of shape {vectors.shape} does not match {len(words)} words")
        if not np.all(np.isfinite(vectors)):
            raise NumericError("embedding contains non-finite values")
        self.words = list(words)
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise DataError("duplicate word in vocabulary")
        vectors.setflags(write=False)
        self.vectors = vectors
        self._unit = None

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def vector(self, word: str) -> np.ndarray:
        try:
            return self.vectors[self.index[word]]
        except KeyError:
            raise OOVError(word) from None

    def unit_vectors(self) -> np.ndarray:
        if self._unit is None:
            norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                self._unit = np.where(norms > 0, self.vectors / norms, 0.0)
        return self._unit


# ---------------------------------------------------------------------------
# training


@numba.njit(nogil=True, cache=True)
def _sgns_pass(tokens, starts, syn0, syn1, table, window, negatives,
               alpha0, done, total, state):
    """One pass over ``tokens``; returns (words processed so far, rng state)."""
    dim = syn0.shape[1]
    tsize = np.uint64(table.shape[0])
    neu1e = np.zeros(dim)
    mul = np.uint64(25214903917)
    add = np.uint64(11)
    for d in range(starts.shape[0] - 1):
        lo = starts[d]
        hi = starts[d + 1]
        for pos in range(lo, hi):
            alpha = alpha0 * max(1.0 - done / (total + 1.0), 1e-4)
            done += 1
            center = tokens[pos]
            state = state * mul + add
            b = np.int64((state >> np.uint64(16)) % np.uint64(window))
            for c in range(max(lo, pos - window + b), min(hi, pos + window - b + 1)):
                if c == pos:
                    continue
                ctx = tokens[c]
                neu1e[:] = 0.0
                for n in range(negatives + 1):
                    if n == 0:
                        target = ctx
                        label = 1.0
                    else:
                        state = state * mul + add
                        target = table[np.int64((state >> np.uint64(16)) % tsize)]
                        if target == ctx:
                            continue
                        label = 0.0
                    f = 0.0
                    for k in range(dim):
                        f += syn0[center, k] * syn1[target, k]
                    if f > 6.0:
                        f = 6.0
                    elif f < -6.0:
                        f = -6.0
                    g = (label - 1.0 / (1.0 + math.exp(-f))) * alpha
                    for k in range(dim):
                        neu1e[k] += g * syn1[target, k]
                        syn1[target, k] = min(max(syn1[target, k] + g * syn0[center, k], -_BOUND), _BOUND)
                for k in range(dim):
                    syn0[center, k] = min(max(syn0[center, k] + neu1e[k], -_BOUND), _BOUND)
    return done, state


def build_vocab(docs: Iterable[Document], min_count: int = 1) -> tuple[list[str], np.ndarray]:
    """Words with frequency >= ``min_count``, most frequent first, ties by word."""
    counts = Counter(t for d in docs for t in d.tokens)
    kept = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    return kept, np.array([counts[w] for w in kept], dtype=np.float64)


def _unigram_table(freqs: np.ndarray, size: int = _TABLE_SIZE) -> np.ndarray:
    p = freqs ** 0.75
    cdf = np.cumsum(p / p.sum())
    grid = (np.arange(size) + 0.5) / size
    return np.minimum(np.searchsorted(cdf, grid), len(freqs) - 1).astype(np.int64)


def _flatten(docs, index) -> tuple[np.ndarray, np.ndarray]:
    ids, starts = [], [0]
    for d in docs:
        ids.extend(index[t] for t in d.tokens if t in index)
        starts.append(len(ids))
    return np.asarray(ids, dtype=np.int64), np.asarray(starts, dtype=np.int64)


def train_skipgram(docs: Sequence[Document], cfg: SkipgramConfig = SkipgramConfig()) -> EmbeddingModel:
    """Train skip-gram vectors on the tokens of ``docs``.

    ``cfg.workers > 1`` runs lock-free worker threads over document shards;
    results then depend on thread scheduling and are not seed-reproducible.
    """
    words, freqs = build_vocab(docs, cfg.min_count)
    if not words:
        raise DataError(f"no token occurs at least {cfg.min_count} times")
    index = {w: i for i, w in enumerate(words)}
    tokens, starts = _flatten(docs, index)
    table = _unigram_table(freqs)

    rng = np.random.default_rng(cfg.seed)
    syn0 = (rng.random((len(words), cfg.dim)) - 0.5) / cfg.dim
    syn1 = np.zeros_like(syn0)
    total = float(len(tokens) * cfg.epochs)
    state = np.uint64(cfg.seed)

    if cfg.workers == 1:
        done = 0.0
        for _ in range(cfg.epochs):
            done, state = _sgns_pass(tokens, starts, syn0, syn1, table, cfg.window,
                                     cfg.negatives, cfg.learning_rate, done, total, state)
            state = np.uint64(state)
    else:
        log.warning("training with %d workers: results are not seed-reproducible", cfg.workers)
        bounds = np.linspace(0, len(starts) - 1, cfg.workers + 1).astype(int)
        shards = [starts[bounds[i]:bounds[i + 1] + 1] for i in range(cfg.workers)]
        shards = [s for s in shards if len(s) > 1]
        states = [np.uint64(cfg.seed + i) for i in range(len(shards))]
        progress = [0.0] * len(shards)

        def run(i):
            share = (shards[i][-1] - shards[i][0]) * cfg.epochs
            done = progress[i]
            done, state = _sgns_pass(tokens, shards[i], syn0, syn1, table, cfg.window,
                                     cfg.negatives, cfg.learning_rate, done, float(share), states[i])
            states[i] = np.uint64(state)
            progress[i] = done

        with ThreadPoolExecutor(cfg.workers) as pool:
            for _ in range(cfg.epochs):
                list(pool.map(run, range(len(shards))))

    if not np.all(np.isfinite(syn0)):
        raise NumericError("skip-gram training produced non-finite vectors")
    return EmbeddingModel(words, syn0)


# ---------------------------------------------------------------------------
# documents and similarity


def doc_vector(model: EmbeddingModel, doc: Document, return_oov: bool = False):
    """Mean of the vectors of in-vocabulary tokens (repeats counted).

    Out-of-vocabulary tokens are skipped; with ``return_oov`` the skipped
    tokens are returned alongside the vector.
    """
    rows = [model.index[t] for t in doc.tokens if t in model.index]
    if not rows:
        raise EmptyDocumentError(doc.doi)
    vec = model.vectors[rows].mean(axis=0)
    if return_oov:
        return vec, [t for t in doc.tokens if t not in model.index]
    return vec


def cosine(model: EmbeddingModel, w1: str, w2: str) -> float:
    a, b = model.vector(w1), model.vector(w2)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DataError(f"zero vector for {w1 if na == 0 else w2!r}: cosine undefined")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def neighbors(model: EmbeddingModel, seed: str, threshold: float = 0.70, k: int | None = 15) -> list[tuple[str, float]]:
    """Words with cosine >= ``threshold`` to ``seed`` (seed excluded), most similar first."""
    i = model.index.get(seed)
    if i is None:
        raise OOVError(seed)
    unit = model.unit_vectors()
    if not unit[i].any():
        raise DataError(f"zero vector for {seed!r}: cosine undefined")
    sims = np.clip(unit @ unit[i], -1.0, 1.0)
    hits = [(model.words[j], float(sims[j])) for j in np.flatnonzero(sims >= threshold) if j != i]
    hits.sort(key=lambda h: (-h[1], h[0]))
    return hits if k is None else hits[:k]


# ---------------------------------------------------------------------------
# word2vec text format


def save(model: EmbeddingModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_text(model, fh)


def write_text(model: EmbeddingModel, fh) -> None:
    fh.write(f"{len(model)} {model.dim}\n")
    for word, row in zip(model.words, model.vectors):
        fh.write(word + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


def load(path) -> EmbeddingModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: header must be '<vocab_size> <dim>'")
        try:
            n, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(f"{path}: non-integer header {header}") from None
        words, rows = [], []
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            if len(parts) != dim + 1:
                raise DataError(f"{path}: line {lineno}: expected {dim} values, got {len(parts) - 1}")
            words.append(parts[0])
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric vector entry") from None
    if len(words) != n:
        raise DataError(f"{path}: header declares {n} words, found {len(words)}")
    return EmbeddingModel(words, np.array(rows, dtype=np.float64).reshape(n, dim))
