"""Evaluation: train/test splits, ROC-AUC, the Extreme10% subset, ActImpact
correlation and AOPC-global perturbation curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Collection, Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .baselines import GlobalImportance
from .corpus import Document
from .errors import DataError, NumericError, UndefinedValueError
from .targets import LabeledDoc, LabelSpec, act_impact_table, derive_labels, in_scope

RANDOM_SPLIT = "random"
TIME_SPLIT = "time"
SEMI_SPLIT = "semi"


@dataclass(frozen=True)
class SplitSpec:
    """How to cut a corpus into labeled train and test sets.

    ``random``: documents published in ``train_years`` are labeled at
    ``train_cit_year``, shuffled and cut at ``train_fraction``.
    ``time``: train on ``train_years``/``train_cit_year``; test on the
    strictly later ``test_years``/``test_cit_year``.
    ``semi``: train on ``train_years``/``train_cit_year`` except a held-out
    ``1 - train_fraction`` of the latest train-year cohort; the held-out part is
    the test set, labeled by citations in ``test_cit_year`` (default the
    following year) against the median of that cohort.
    """

    kind: str
    train_years: frozenset[int]
    train_cit_year: int
    test_years: frozenset[int] = frozenset()
    test_cit_year: int | None = None
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "train_years", frozenset(int(y) for y in self.train_years))
        object.__setattr__(self, "test_years", frozenset(int(y) for y in self.test_years))
        if self.kind not in (RANDOM_SPLIT, TIME_SPLIT, SEMI_SPLIT):
            raise ValueError(f"unknown split kind {self.kind!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if not self.train_years:
            raise ValueError("train_years must be non-empty")
        if self.kind == TIME_SPLIT:
            if not self.test_years or self.test_cit_year is None:
                raise ValueError("a time split needs test_years and test_cit_year")
            if min(self.test_years) <= max(self.train_years):
                raise ValueError("time split: test years must all come after the train years")
            if self.test_cit_year <= self.train_cit_year:
                raise ValueError("time split: test citation year must come after the train citation year")
        if self.kind == SEMI_SPLIT:
            if self.test_cit_year is None:
                object.__setattr__(self, "test_cit_year", self.train_cit_year + 1)
            if self.test_cit_year <= self.train_cit_year:
                raise ValueError("semi split: test citation year must come after the train citation year")
            if self.test_years and self.test_years != {max(self.train_years)}:
                raise ValueError("semi split: the test cohort is the latest train year")


def split(docs: Sequence[Document], spec: SplitSpec) -> tuple[list[LabeledDoc], list[LabeledDoc]]:
    """Labeled (train, test) sets for ``spec``; deterministic given ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    train_labeled = derive_labels(docs, LabelSpec(spec.train_years, spec.train_cit_year))
    if spec.kind == RANDOM_SPLIT:
        order = rng.permutation(len(train_labeled))
        n_train = int(round(spec.train_fraction * len(order)))
        train = [train_labeled[i] for i in order[:n_train]]
        test = [train_labeled[i] for i in order[n_train:]]
    elif spec.kind == TIME_SPLIT:
        train = train_labeled
        test = derive_labels(docs, LabelSpec(spec.test_years, spec.test_cit_year))
    else:
        latest = max(spec.train_years)
        cohort = derive_labels(docs, LabelSpec({latest}, spec.test_cit_year))
        order = rng.permutation(len(cohort))
        n_keep = int(round(spec.train_fraction * len(order)))
        test = [cohort[i] for i in sorted(order[n_keep:])]
        held_out = {ld.doc.doi for ld in test}
        train = [ld for ld in train_labeled if ld.doc.doi not in held_out]
    if not train or not test:
        raise DataError(f"{spec.kind} split left {len(train)} train and {len(test)} test documents")
    return train, test


# ---------------------------------------------------------------------------
# metrics


def auc(scores, labels) -> float:
    """ROC-AUC as the Mann-Whitney statistic; tied scores count one half."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if len(s) != len(y):
        raise DataError(f"{len(s)} scores for {len(y)} labels")
    if not np.all(np.isfinite(s)):
        raise NumericError("non-finite score")
    pos = y == 1
    n1, n0 = int(pos.sum()), int((y == 0).sum())
    if n1 + n0 != len(y):
        raise DataError("labels must be 0/1")
    if n1 == 0 or n0 == 0:
        raise DataError("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def _as_doc(item) -> Document:
    return item.doc if isinstance(item, LabeledDoc) else item


def extreme10(test_docs: Sequence, cit_year: int) -> list:
    """The ``ceil(n / 20)`` most- and least-cited documents (ties broken by doi).

    Accepts documents or labeled documents and returns items of the same kind,
    most cited first.
    """
    n = len(test_docs)
    if n < 20:
        raise DataError(f"Extreme10% needs at least 20 test documents, got {n}")
    k = -(-n // 20)
    key = [(_as_doc(x).cit(cit_year), _as_doc(x).doi) for x in test_docs]
    top = sorted(range(n), key=lambda i: (-key[i][0], key[i][1]))[:k]
    chosen = set(top)
    bottom = [i for i in sorted(range(n), key=lambda i: key[i]) if i not in chosen][:k]
    return [test_docs[i] for i in top] + [test_docs[i] for i in reversed(bottom)]


def pearson(x, y) -> float:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise DataError("pearson needs two equal-length sequences of at least 2 values")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NumericError("non-finite input to pearson")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = math.sqrt(float(da @ da)), math.sqrt(float(db @ db))
    if sa == 0 or sb == 0:
        raise UndefinedValueError("correlation undefined: a sequence has zero variance")
    return float(np.clip((da @ db) / (sa * sb), -1.0, 1.0))


@dataclass(frozen=True)
class ImpactPoint:
    word: str
    importance: float
    act_impact: float


def actimpact_correlation(importance: GlobalImportance, docs: Sequence[Document], H: Collection[str],
                          top_n: int = 100, bottom_n: int = 100,
                          pub_years: Collection[int] | None = None) -> tuple[float, list[ImpactPoint]]:
    """Pearson r between importance and ActImpact over the ``top_n`` most and
    ``bottom_n`` least important words that occur in the in-scope documents."""
    table = act_impact_table(in_scope(docs, pub_years), H)
    eligible = [w for w in importance.ranking() if w in table]
    if len(eligible) < top_n + bottom_n:
        raise DataError(f"only {len(eligible)} ranked words occur in the documents; "
                        f"need {top_n} + {bottom_n}")
    chosen = eligible[:top_n] + (eligible[len(eligible) - bottom_n:] if bottom_n else [])
    points = [ImpactPoint(w, importance.scores[w], table[w]) for w in chosen]
    r = pearson([p.importance for p in points], [p.act_impact for p in points])
    return r, points


# ---------------------------------------------------------------------------
# AOPC


@dataclass
class AopcCurve:
    points: list[tuple[int, float]]
    area: float
    raw_area: float = field(default=0.0)
    removed: list[str] = field(default_factory=list)


def trapezoid_area(points: Sequence[tuple[float, float]], normalize_x: bool = True) -> float:
    """Trapezoid rule over ``(x, y)`` points; with ``normalize_x`` the x range is mapped to [0, 1]."""
    if len(points) < 2:
        raise DataError("trapezoid area needs at least 2 points")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise NumericError("non-finite curve point")
    if np.any(np.diff(xs) <= 0):
        raise DataError("curve x values must be strictly increasing")
    if normalize_x:
        xs = (xs - xs[0]) / (xs[-1] - xs[0])
    return float(np.sum(np.diff(xs) * (ys[:-1] + ys[1:]) / 2.0))


def aopc_global(predict: Callable[[Sequence[Sequence[str]]], np.ndarray], docs: Sequence,
                ranking: GlobalImportance | Sequence[str], K: int = 10) -> AopcCurve:
    """Mean signed drop ``p(original) - p(perturbed)`` after cumulatively
    removing every occurrence of the top-k ranked words, for k = 0..K.

    K is capped at the ranking length. ``predict`` must score an empty token
    list (an intercept-only prediction for the embedding classifier).
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    if not docs:
        raise DataError("no test documents")
    words = ranking.ranking() if isinstance(ranking, GlobalImportance) else list(ranking)
    K = min(K, len(words))
    tokens = [_as_doc(d).tokens for d in docs]
    p0 = _checked(predict, tokens)
    points = [(0, 0.0)]
    removed: set[str] = set()
    for k in range(1, K + 1):
        removed.add(words[k - 1])
        p = _checked(predict, [tuple(t for t in toks if t not in removed) for toks in tokens])
        points.append((k, float(np.mean(p0 - p))))
    if K == 0:
        return AopcCurve(points, 0.0, 0.0, [])
    return AopcCurve(points, trapezoid_area(points), trapezoid_area(points, normalize_x=False), words[:K])


def _checked(predict, token_lists) -> np.ndarray:
    p = np.asarray(predict(token_lists), dtype=np.float64).ravel()
    if p.shape != (len(token_lists),):
        raise DataError(f"predictor returned {p.shape[0]} values for {len(token_lists)} documents")
    if not np.all(np.isfinite(p)):
        raise NumericError("predictor returned non-finite values")
    return p


def curve_csv(curve: AopcCurve, comments: Iterable[str] = ()) -> str:
    lines = [f"# {c}" for c in comments] + ["k,mean_drop"]
    lines += [f"{k},{v!r}" for k, v in curve.points]
    return "\n".join(lines) + "\n"
