"""Word scores read directly off an embedding classifier.

A word is scored as a one-word abstract: its logit is
``intercept + weights . vector(word)`` and its score the logistic of that.
Because document vectors are token averages, a document's logit is exactly
the mean of its tokens' logits. :func:`explain_document` checks this
identity on every call.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import Document
from .embedding import EmbeddingModel, doc_vector, neighbors
from .errors import EmptyDocumentError, FidelityError, OOVError
from .models import EMBEDDING, LinearClassifier, logistic

FIDELITY_RTOL = 1e-9


@dataclass(frozen=True)
class WordScore:
    word: str
    logit: float
    num_art: int = 0
    first_year: int | None = None
    cosine: float | None = None

    @property
    def score(self) -> float:
        return logistic(self.logit)

    @property
    def cscore(self) -> float:
        return self.score * self.num_art

    def as_row(self, rank: int | None = None) -> dict:
        row = {"rank": rank, "word": self.word, "score": self.score, "logit": self.logit,
               "num_art": self.num_art, "cscore": display_cscore(self.score, self.num_art),
               "first_year": self.first_year}
        if self.cosine is not None:
            row["cosine"] = self.cosine
        return row


@dataclass
class DocumentExplanation:
    doi: str
    logit: float
    words: list[WordScore]
    oov: list[str] = field(default_factory=list)

    @property
    def score(self) -> float:
        return logistic(self.logit)


def display_cscore(score: float, num_art: int) -> int:
    """CScore rounded half-up to an integer, as shown in reports."""
    return int(math.floor(score * num_art + 0.5))


def _check_classifier(clf: LinearClassifier, model: EmbeddingModel):
    if clf.feature_space != EMBEDDING or clf.dim != model.dim:
        raise ValueError("word scores need an embedding classifier matching the embedding dimension")


def score_word(clf: LinearClassifier, model: EmbeddingModel, word: str) -> WordScore:
    """Score any word that has an embedding vector, seen in training data or not."""
    _check_classifier(clf, model)
    return WordScore(word, clf.logit(model.vector(word)))


def word_logits(clf: LinearClassifier, model: EmbeddingModel, words: Sequence[str]) -> np.ndarray:
    _check_classifier(clf, model)
    try:
        rows = [model.index[w] for w in words]
    except KeyError as exc:
        raise OOVError(exc.args[0]) from None
    return model.vectors[rows] @ clf.weights + clf.intercept


def explain_document(clf: LinearClassifier, model: EmbeddingModel, doc: Document) -> DocumentExplanation:
    """Per-token word scores whose mean logit reproduces the document logit.

    Tokens without a vector are left out of both sides and listed in ``oov``.
    Raises :class:`FidelityError` if the two logits disagree beyond
    ``1e-9 * (1 + |logit|)``.
    """
    _check_classifier(clf, model)
    vec, oov = doc_vector(model, doc, return_oov=True)
    doc_logit = clf.logit(vec)
    kept = [t for t in doc.tokens if t in model.index]
    logits = word_logits(clf, model, kept)
    mean_logit = float(np.mean(logits))
    if abs(doc_logit - mean_logit) > FIDELITY_RTOL * (1.0 + abs(doc_logit)):
        raise FidelityError(f"{doc.doi}: document logit {doc_logit!r} != mean word logit {mean_logit!r}")
    return DocumentExplanation(doc.doi, doc_logit, [WordScore(w, float(z)) for w, z in zip(kept, logits)], oov)


def rank_words(clf: LinearClassifier, model: EmbeddingModel, words: Iterable[str] | None = None) -> list[WordScore]:
    """Word scores, highest first; equal scores fall back to logit, then to the word."""
    words = model.words if words is None else list(dict.fromkeys(words))
    logits = word_logits(clf, model, words)
    scored = [WordScore(w, float(z)) for w, z in zip(words, logits)]
    scored.sort(key=lambda ws: (-ws.score, -ws.logit, ws.word))
    return scored


def top_bottom(ranked: Sequence[WordScore], top: int = 100, bottom: int = 100) -> tuple[list[WordScore], list[WordScore]]:
    if top + bottom > len(ranked):
        raise ValueError(f"cannot take {top} + {bottom} words from {len(ranked)}")
    return list(ranked[:top]), list(ranked[len(ranked) - bottom:]) if bottom else []


def monotonicity_check(clf: LinearClassifier, model: EmbeddingModel, doc: Document, k: int, replacement: str) -> bool:
    """True iff substituting token ``k`` moves the document score in the same
    direction (or not at all) as the word score changes."""
    if not 0 <= k < len(doc.tokens):
        raise IndexError(f"position {k} outside document of length {len(doc.tokens)}")
    old, new = score_word(clf, model, doc.tokens[k]), score_word(clf, model, replacement)
    swapped = doc.with_tokens(doc.tokens[:k] + (replacement,) + doc.tokens[k + 1:])
    before = logistic(clf.logit(doc_vector(model, doc)))
    after = logistic(clf.logit(doc_vector(model, swapped)))
    return np.sign(new.score - old.score) == np.sign(after - before)


# ---------------------------------------------------------------------------
# corpus statistics and reports


def first_years(docs: Iterable[Document]) -> dict[str, int]:
    """Earliest publication year of each token over ``docs``."""
    first: dict[str, int] = {}
    for d in docs:
        for t in set(d.tokens):
            if t not in first or d.pub_year < first[t]:
                first[t] = d.pub_year
    return first


def num_art(docs: Iterable[Document], window: tuple[int, int] | None = None) -> dict[str, int]:
    """Number of documents containing each token, restricted to a closed year window."""
    counts: dict[str, int] = defaultdict(int)
    for d in docs:
        if window is None or window[0] <= d.pub_year <= window[1]:
            for t in set(d.tokens):
                counts[t] += 1
    return dict(counts)


def cscore_table(clf: LinearClassifier, model: EmbeddingModel, docs: Sequence[Document],
                 window: tuple[int, int], first_seen_after: int | None = None) -> list[WordScore]:
    """Words occurring in ``window`` ranked by ``score * num_art``.

    With ``first_seen_after`` only words whose earliest year in ``docs`` is
    later than that year are kept.
    """
    if window[0] > window[1]:
        raise ValueError(f"empty year window {window}")
    counts = num_art(docs, window)
    first = first_years(docs)
    words = sorted(w for w in counts if w in model.index
                   and (first_seen_after is None or first[w] > first_seen_after))
    if not words:
        return []
    logits = word_logits(clf, model, words)
    rows = [WordScore(w, float(z), counts[w], first[w]) for w, z in zip(words, logits)]
    rows.sort(key=lambda ws: (-ws.cscore, -ws.logit, ws.word))
    return rows


def neighbor_report(clf: LinearClassifier, model: EmbeddingModel, seed: str, threshold: float = 0.70,
                    k: int = 15, docs: Sequence[Document] | None = None,
                    window: tuple[int, int] | None = None) -> list[WordScore]:
    """Words at cosine >= ``threshold`` from ``seed``, re-ranked by score, top ``k``."""
    hits = neighbors(model, seed, threshold, k=None)
    if not hits:
        return []
    counts = num_art(docs, window) if docs is not None else {}
    first = first_years(docs) if docs is not None else {}
    logits = word_logits(clf, model, [w for w, _ in hits])
    rows = [WordScore(w, float(z), counts.get(w, 0), first.get(w), cos)
            for (w, cos), z in zip(hits, logits)]
    rows.sort(key=lambda ws: (-ws.score, -ws.logit, ws.word))
    return rows[:k]


def fidelity_violations(clf: LinearClassifier, model: EmbeddingModel, docs: Iterable[Document]) -> list[str]:
    """DOIs whose explanation fails the fidelity identity (documents without vectors are skipped)."""
    bad = []
    for d in docs:
        try:
            explain_document(clf, model, d)
        except FidelityError:
            bad.append(d.doi)
        except EmptyDocumentError:
            continue
    return bad
