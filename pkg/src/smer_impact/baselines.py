"""Comparator explainers: a LIME-style local surrogate, its global
aggregations (GALE), a random ranking, and SMER wrapped as a global ranking.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import Document
from .embedding import EmbeddingModel
from .errors import DataError, NumericError
from .models import LinearClassifier
from .smer import rank_words

SMER = "smer"
GLOBAL_LIME = "global_lime"
GLOBAL_AVG_LIME = "global_avg_lime"
RANDOM = "random"
EXTERNAL = "external"
METHODS = (SMER, GLOBAL_LIME, GLOBAL_AVG_LIME, RANDOM, EXTERNAL)

SUM_IMPORTANCE = "sum_importance"
AVERAGE_IMPORTANCE = "average_importance"

Predictor = Callable[[Sequence[Sequence[str]]], np.ndarray]


@dataclass
class LocalExplanation:
    doi: str
    weights: dict[str, float]
    n_features: int = 15
    n_samples: int = 1000
    seed: int = 0
    intercept: float = 0.0

    def to_json(self) -> dict:
        return {"doi": self.doi, "weights": {w: repr(v) for w, v in self.weights.items()},
                "intercept": repr(self.intercept), "n_features": self.n_features,
                "n_samples": self.n_samples, "seed": self.seed}

    @classmethod
    def from_json(cls, obj) -> "LocalExplanation":
        return cls(obj["doi"], {w: float(v) for w, v in obj["weights"].items()}, int(obj["n_features"]),
                   int(obj["n_samples"]), int(obj["seed"]), float(obj.get("intercept", 0.0)))


@dataclass
class GlobalImportance:
    method: str
    scores: dict[str, float]
    order: list[str] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown importance method {self.method!r}")
        if not all(math.isfinite(v) for v in self.scores.values()):
            raise NumericError(f"{self.method}: non-finite importance score")

    def ranking(self) -> list[str]:
        """Words from most to least important; ties broken by the word itself."""
        if self.order is not None:
            return list(self.order)
        return sorted(self.scores, key=lambda w: (-self.scores[w], w))


# ---------------------------------------------------------------------------
# LIME-style local surrogate


def _weighted_ridge(X: np.ndarray, y: np.ndarray, sw: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Ridge regression with intercept and sample weights (closed form)."""
    sw = sw / sw.sum()
    x_mean = sw @ X
    y_mean = float(sw @ y)
    Xc, yc = X - x_mean, y - y_mean
    # rescale so alpha acts on the unnormalised weights, as in scikit-learn
    scale = len(y)
    A = (Xc.T * (sw * scale)) @ Xc + alpha * np.eye(X.shape[1])
    coef = np.linalg.solve(A, (Xc.T * (sw * scale)) @ yc)
    return coef, y_mean - float(x_mean @ coef)


def lime_explain(predict: Predictor, doc: Document, n_features: int = 15, n_samples: int = 1000,
                 seed: int = 0, kernel_width: float | None = None, ridge_alpha: float = 1.0) -> LocalExplanation:
    """Explain ``predict`` around ``doc`` with a weighted linear surrogate.

    Each perturbed sample removes every occurrence of a random subset of the
    document's distinct words: the subset size is uniform on ``1..m`` and the
    subset uniform given its size. The first sample is the document itself.
    Samples are weighted by ``sqrt(exp(-d^2 / width^2))`` where ``d`` is the
    cosine distance between the sample's mask and the all-ones mask and
    ``width`` defaults to ``0.25 * sqrt(m)``.
    """
    if n_samples < 10:
        raise ValueError("n_samples must be >= 10")
    vocab = list(dict.fromkeys(doc.tokens))
    m = len(vocab)
    if m == 0:
        raise DataError(f"{doc.doi}: empty document")
    rng = np.random.default_rng(seed)
    masks = np.ones((n_samples, m))
    for i in range(1, n_samples):
        drop = rng.choice(m, size=int(rng.integers(1, m + 1)), replace=False)
        masks[i, drop] = 0.0

    samples = []
    for row in masks:
        keep = {w for w, on in zip(vocab, row) if on}
        samples.append(tuple(t for t in doc.tokens if t in keep))
    preds = np.asarray(predict(samples), dtype=np.float64).ravel()
    if preds.shape != (n_samples,):
        raise DataError(f"predictor returned {preds.shape[0]} values for {n_samples} samples")
    if not np.all(np.isfinite(preds)):
        raise NumericError(f"{doc.doi}: predictor returned non-finite values")

    kept = masks.sum(axis=1)
    distance = 1.0 - np.sqrt(kept / m)  # cosine distance to the all-ones mask
    width = 0.25 * math.sqrt(m) if kernel_width is None else kernel_width
    sample_weight = np.sqrt(np.exp(-(distance ** 2) / width ** 2))
    coef, intercept = _weighted_ridge(masks, preds, sample_weight, ridge_alpha)

    top = sorted(range(m), key=lambda j: (-abs(coef[j]), j))[:n_features]
    return LocalExplanation(doc.doi, {vocab[j]: float(coef[j]) for j in top}, n_features, n_samples, seed, intercept)


# ---------------------------------------------------------------------------
# global importance


def gale_global(expls: Iterable[LocalExplanation], mode: str = SUM_IMPORTANCE) -> GlobalImportance:
    """Aggregate absolute local weights per word: summed, or averaged over
    the explanations in which the word appears."""
    total: dict[str, float] = defaultdict(float)
    seen: dict[str, int] = defaultdict(int)
    n = 0
    for e in expls:
        n += 1
        for w, v in e.weights.items():
            total[w] += abs(v)
            seen[w] += 1
    if n == 0:
        raise DataError("no local explanations to aggregate")
    if mode == SUM_IMPORTANCE:
        return GlobalImportance(GLOBAL_LIME, dict(total))
    if mode == AVERAGE_IMPORTANCE:
        return GlobalImportance(GLOBAL_AVG_LIME, {w: total[w] / seen[w] for w in total})
    raise ValueError(f"unknown GALE mode {mode!r}")


def random_importance(vocab: Iterable[str], seed: int = 0) -> GlobalImportance:
    words = sorted(set(vocab))
    draws = np.random.default_rng(seed).random(len(words))
    return GlobalImportance(RANDOM, {w: float(u) for w, u in zip(words, draws)})


def smer_global(clf: LinearClassifier, model: EmbeddingModel, vocab: Iterable[str] | None = None) -> GlobalImportance:
    ranked = rank_words(clf, model, vocab)
    return GlobalImportance(SMER, {ws.word: ws.score for ws in ranked}, order=[ws.word for ws in ranked])


# ---------------------------------------------------------------------------
# ranking files: two CSV columns (word, score); lines starting with '#' are comments


def ranking_csv(gi: GlobalImportance, comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(f"# method: {gi.method}\n")
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["word", "score"])
    for w in gi.ranking():
        writer.writerow([w, repr(gi.scores[w])])
    return buf.getvalue()


def read_ranking(path, method: str | None = None) -> GlobalImportance:
    """Load a ranking file; the file's row order is kept as the ranking.

    The method tag comes from ``method``, else from a ``# method: <tag>``
    comment, else defaults to ``external``.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.readlines()
    tagged = [ln[1:].split(":", 1)[1].strip() for ln in lines
              if ln.startswith("#") and ln[1:].split(":", 1)[0].strip() == "method" and ":" in ln]
    method = method or (tagged[0] if tagged else EXTERNAL)
    if method not in METHODS:
        raise DataError(f"{path}: unknown ranking method {method!r}")
    rows = list(csv.reader(ln for ln in lines if not ln.startswith("#")))
    if not rows or [c.strip() for c in rows[0][:2]] != ["word", "score"]:
        raise DataError(f"{path}: expected a header 'word,score'")
    scores, order = {}, []
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) < 2:
            raise DataError(f"{path}: row {lineno}: expected two columns")
        try:
            scores[row[0]] = float(row[1])
        except ValueError:
            raise DataError(f"{path}: row {lineno}: score {row[1]!r} is not a number") from None
        order.append(row[0])
    return GlobalImportance(method, scores, order=order)
