"""Logistic regression on averaged word embeddings and on binary bag-of-words.

Both classifiers minimise the ridge-penalised negative log-likelihood

    sum_i [log(1 + exp(z_i)) - y_i z_i] + (l2 / 2) * ||weights||^2,
    z_i = intercept + weights . x_i

with the intercept left unpenalised (``l2 = 1 / C`` in scikit-learn terms).
The optimiser is deterministic full-batch gradient descent: a
Barzilai-Borwein trial step shrunk by backtracking until the Armijo condition
holds, so the objective never increases between iterations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .corpus import Document
from .embedding import EmbeddingModel, doc_vector
from .errors import DataError, NumericError

EMBEDDING = "embedding"
BOW = "bow"


def logistic(xi):
    """The logistic link ``1 / (1 + exp(-xi))``; saturates instead of overflowing."""
    out = expit(xi)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TrainConfig:
    l2_lambda: float = 1.0
    max_iters: int = 10_000
    tol: float = 1e-8
    seed: int = 0  # unused by the deterministic optimiser; recorded for provenance

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class LinearClassifier:
    intercept: float
    weights: np.ndarray
    feature_space: str = EMBEDDING
    dictionary: list[str] | None = None
    history: list[float] = field(default_factory=list, repr=False)
    converged: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.feature_space not in (EMBEDDING, BOW):
            raise ValueError(f"unknown feature space {self.feature_space!r}")
        if self.feature_space == BOW:
            if self.dictionary is None or len(self.dictionary) != len(self.weights):
                raise DataError("bow classifier needs a dictionary matching its weights")
            self._index = {w: i for i, w in enumerate(self.dictionary)}
        if not (math.isfinite(self.intercept) and np.all(np.isfinite(self.weights))):
            raise NumericError("classifier has non-finite coefficients")

    @property
    def dim(self) -> int:
        return len(self.weights)

    def logit(self, X):
        """``intercept + weights . x`` for one feature vector or each row of a matrix."""
        z = X @ self.weights + self.intercept
        return float(z) if np.ndim(z) == 0 else np.asarray(z).ravel()

    def predict_proba(self, X):
        return logistic(self.logit(X))

    def index_of(self, word: str) -> int:
        return self._index[word]

    # persistence

    def to_json(self, embedding_sha256: str | None = None) -> dict:
        obj = {
            "feature_space": self.feature_space,
            "intercept": repr(float(self.intercept)),
            "weights": [repr(float(w)) for w in self.weights],
            "converged": bool(self.converged),
            "iterations": max(len(self.history) - 1, 0),
        }
        if self.feature_space == BOW:
            obj["dictionary"] = list(self.dictionary)
        else:
            obj["dim"] = self.dim
            obj["embedding_sha256"] = embedding_sha256
        return obj

    @classmethod
    def from_json(cls, obj) -> "LinearClassifier":
        try:
            return cls(float(obj["intercept"]), np.array([float(w) for w in obj["weights"]]),
                       obj["feature_space"], obj.get("dictionary"), converged=bool(obj.get("converged")))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed classifier file: {exc}") from None


def save_classifier(clf: LinearClassifier, path, embedding_sha256: str | None = None) -> None:
    Path(path).write_text(json.dumps(clf.to_json(embedding_sha256), indent=1) + "\n", encoding="utf-8")


def load_classifier(path) -> tuple[LinearClassifier, dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg})") from None
    return LinearClassifier.from_json(obj), obj


# ---------------------------------------------------------------------------
# training


def _objective(X, y, b0, w, lam):
    z = X @ w + b0
    loss = np.sum(np.logaddexp(0.0, z) - y * z)
    return loss + 0.5 * lam * float(w @ w), z


def _gradient(X, y, z, w, lam):
    r = expit(z) - y
    return float(r.sum()), np.asarray(X.T @ r).ravel() + lam * w


def train_lr(features, labels, cfg: TrainConfig = TrainConfig(), feature_space: str = EMBEDDING,
             dictionary: Sequence[str] | None = None) -> LinearClassifier:
    """Fit ridge-penalised logistic regression by full-batch gradient descent.

    ``features`` may be a dense array or a scipy sparse matrix. Stops when the
    gradient norm drops below ``cfg.tol``, after ``cfg.max_iters`` steps, or
    when no step along the negative gradient lowers the objective any more.
    The objective trace is kept in ``history``.
    """
    X = features if sp.issparse(features) else np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("features must be a 2-d matrix")
    y = np.asarray(labels, dtype=np.float64)
    n, d = X.shape
    if n < 2 or len(y) != n:
        raise DataError(f"need >= 2 rows with one label each, got {n} rows and {len(y)} labels")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0/1")
    if y.min() == y.max():
        raise DataError("labels contain a single class")
    data = X.data if sp.issparse(X) else X
    if not np.all(np.isfinite(data)):
        raise DataError("features contain non-finite values")
    if sp.issparse(X):
        X = X.tocsr().astype(np.float64)

    lam = cfg.l2_lambda
    b0, w = 0.0, np.zeros(d)
    f, z = _objective(X, y, b0, w, lam)
    g0, g = _gradient(X, y, z, w, lam)
    history = [f]
    step = 1.0 / (0.25 * (n + _sq_norm(X)) + lam)
    converged = False
    for _ in range(cfg.max_iters):
        gnorm2 = g0 * g0 + float(g @ g)
        if math.sqrt(gnorm2) < cfg.tol:
            converged = True
            break
        t = step
        while True:
            nb0, nw = b0 - t * g0, w - t * g
            nf, nz = _objective(X, y, nb0, nw, lam)
            if nf <= f - 1e-4 * t * gnorm2:
                break
            t *= 0.5
            if t < 1e-300:
                break
        if not nf < f:
            # no representable decrease left along the gradient
            converged = bool(math.sqrt(gnorm2) < max(cfg.tol, 1e-6 * (1.0 + abs(f))))
            break
        ng0, ng = _gradient(X, y, nz, nw, lam)
        # Barzilai-Borwein trial step for the next iteration
        s = np.concatenate(([nb0 - b0], nw - w))
        dg = np.concatenate(([ng0 - g0], ng - g))
        sy = float(s @ dg)
        step = float(s @ s) / sy if sy > 0 else t * 2.0
        b0, w, f, g0, g = nb0, nw, nf, ng0, ng
        history.append(f)
    if not (math.isfinite(f) and math.isfinite(b0) and np.all(np.isfinite(w))):
        raise NumericError("logistic regression diverged to non-finite values")
    return LinearClassifier(b0, w, feature_space, list(dictionary) if dictionary is not None else None,
                            history, converged)


def _sq_norm(X) -> float:
    """Squared Frobenius norm, an upper bound on the Hessian's largest eigenvalue (times 4)."""
    if sp.issparse(X):
        return float(X.multiply(X).sum())
    return float(np.sum(X * X))


# ---------------------------------------------------------------------------
# embedding features


def embedding_matrix(model: EmbeddingModel, docs: Sequence[Document]) -> np.ndarray:
    return np.vstack([doc_vector(model, d) for d in docs])


def score_abstract(clf: LinearClassifier, model: EmbeddingModel, doc: Document) -> float:
    return logistic(clf.logit(doc_vector(model, doc)))


class EmbeddingPredictor:
    """Batch predictor ``docs -> P(high)`` for the embedding classifier.

    Token sequences with no in-vocabulary word (for example after every word
    was removed) are scored by the intercept alone.
    """

    def __init__(self, clf: LinearClassifier, model: EmbeddingModel):
        if clf.feature_space != EMBEDDING or clf.dim != model.dim:
            raise DataError("classifier does not match the embedding dimension")
        self.clf, self.model = clf, model

    def logits(self, token_lists) -> np.ndarray:
        out = np.empty(len(token_lists))
        idx = self.model.index
        for i, tokens in enumerate(token_lists):
            rows = [idx[t] for t in tokens if t in idx]
            if rows:
                out[i] = self.clf.logit(self.model.vectors[rows].mean(axis=0))
            else:
                out[i] = self.clf.intercept
        return out

    def __call__(self, token_lists) -> np.ndarray:
        return expit(self.logits(token_lists))


# ---------------------------------------------------------------------------
# bag of words


def build_dictionary(docs: Sequence[Document]) -> list[str]:
    return sorted({t for d in docs for t in d.tokens})


def bow_vectorize(doc: Document, dictionary: Sequence[str] | dict) -> np.ndarray:
    """Binary presence vector of ``doc`` over ``dictionary``."""
    index = dictionary if isinstance(dictionary, dict) else {w: i for i, w in enumerate(dictionary)}
    if not index:
        raise DataError("empty dictionary")
    vec = np.zeros(len(index), dtype=np.float64)
    for t in set(doc.tokens):
        k = index.get(t)
        if k is not None:
            vec[k] = 1.0
    return vec


def bow_matrix(docs: Sequence[Document], dictionary: Sequence[str]) -> sp.csr_matrix:
    index = {w: i for i, w in enumerate(dictionary)}
    rows, cols = [], []
    for r, d in enumerate(docs):
        ks = sorted({index[t] for t in d.tokens if t in index})
        rows.extend([r] * len(ks))
        cols.extend(ks)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(docs), len(dictionary)))


class BowPredictor:
    def __init__(self, clf: LinearClassifier):
        if clf.feature_space != BOW:
            raise DataError("classifier is not a bag-of-words model")
        self.clf = clf

    def __call__(self, token_lists) -> np.ndarray:
        out = np.empty(len(token_lists))
        for i, tokens in enumerate(token_lists):
            ks = {self.clf._index[t] for t in tokens if t in self.clf._index}
            out[i] = self.clf.intercept + sum(self.clf.weights[k] for k in sorted(ks))
        return expit(out)


def orc(clf: LinearClassifier, k: int) -> float:
    """Odds-ratio change ``exp(weight_k)`` of dictionary word ``k``."""
    if clf.feature_space != BOW:
        raise DataError("ORC is defined for bag-of-words classifiers")
    if not 0 <= k < clf.dim:
        raise IndexError(f"word index {k} outside dictionary of size {clf.dim}")
    return math.exp(clf.weights[k])
