"""Planted synthetic corpora for desk-scale experiments.

Each abstract has a latent impact ``s`` drawn uniformly from ``[-1, 1]``.
Its topic tokens come from a "high" word cluster with probability
``(1 + s) / 2`` and from a "low" cluster otherwise, mixed with neutral filler
words. Citation counts grow with ``s`` plus Gaussian noise, so labels follow
the majority cluster of a document except for roughly ``label_noise`` of
the documents.

A few "novel" high-cluster words occur only in documents of ``novel_year``,
which carry no citation data (the situation of a term that appears after the
classifier's training period).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from .corpus import Document, RawRecord

_LETTERS = "bcdfghjklmnpqrstvwxz"
_VOWELS = "aeiou"


def _names(prefix: str, n: int) -> list[str]:
    out = []
    for i in range(n):
        a, b = divmod(i, len(_VOWELS))
        out.append(f"{prefix}{_LETTERS[a % len(_LETTERS)]}{_VOWELS[b]}{_LETTERS[(a // len(_LETTERS)) % len(_LETTERS)]}")
    return out


@dataclass
class PlantedCorpus:
    documents: list[Document]
    high_words: list[str]
    low_words: list[str]
    neutral_words: list[str]
    novel_words: list[str]
    latent: dict[str, float] = field(default_factory=dict)
    cit_year: int = 2021

    def effect(self) -> dict[str, float]:
        """The planted per-word effect: +1 high cluster, -1 low cluster, 0 otherwise."""
        eff = {w: 0.0 for w in self.neutral_words}
        eff.update({w: 1.0 for w in self.high_words + self.novel_words})
        eff.update({w: -1.0 for w in self.low_words})
        return eff

    def raw_records(self) -> list[RawRecord]:
        """Render documents as raw abstracts with punctuation, case and numbers."""
        rng = np.random.default_rng(0)
        out = []
        for doc in self.documents:
            words = list(doc.tokens)
            words[0] = words[0].capitalize()
            pieces = []
            for i, w in enumerate(words):
                pieces.append(w)
                r = rng.random()
                if r < 0.08:
                    pieces[-1] += ","
                elif r < 0.12:
                    pieces.append(str(int(rng.integers(1, 500))))
                elif r < 0.15 and i < len(words) - 1:
                    pieces[-1] += "."
            out.append(RawRecord(doc.doi, " ".join(pieces) + ".", doc.pub_year, dict(doc.citations)))
        return out


def planted_corpus(n_docs: int = 1500, n_topic_words: int = 20, n_neutral_words: int = 400,
                   topic_tokens: int = 21, neutral_tokens: int = 25, label_noise: float = 0.10,
                   years=(2019, 2020), cit_years=(2020, 2021), n_novel_docs: int = 40,
                   n_novel_words: int = 3, novel_year: int = 2022, seed: int = 0) -> PlantedCorpus:
    rng = np.random.default_rng(seed)
    high = _names("hi", n_topic_words)
    low = _names("lo", n_topic_words)
    neutral = _names("nt", n_neutral_words)
    novel = _names("nv", n_novel_words)
    # neutral filler follows a mild Zipf law so the vocabulary has a frequency tail
    zipf = 1.0 / np.arange(1, n_neutral_words + 1) ** 0.5
    zipf /= zipf.sum()

    # citation noise chosen so that P(label != sign(s)) == label_noise for s ~ U(-1, 1)
    sigma = _noise_scale(label_noise)

    def topic(s, vocab_hi):
        p_hi = (1.0 + s) / 2.0
        pick_hi = rng.random(topic_tokens) < p_hi
        return [vocab_hi[rng.integers(len(vocab_hi))] if h else low[rng.integers(len(low))] for h in pick_hi]

    def compose(topic_words):
        filler = list(rng.choice(neutral, size=neutral_tokens, p=zipf))
        tokens = topic_words + filler
        rng.shuffle(tokens)
        return tuple(tokens)

    docs, latent = [], {}
    for i in range(n_docs):
        s = rng.uniform(-1.0, 1.0)
        year = int(years[i % len(years)])
        cits = {}
        for t in cit_years:
            impact = s + sigma * rng.normal()
            cits[int(t)] = int(math.floor(math.exp(2.0 + 1.5 * impact)))
        doi = f"10.5555/planted.{seed}.{i:05d}"
        docs.append(Document(doi, compose(topic(s, high)), year, cits))
        latent[doi] = s
    for i in range(n_novel_docs):
        s = rng.uniform(0.3, 1.0)
        doi = f"10.5555/planted.{seed}.novel.{i:04d}"
        docs.append(Document(doi, compose(topic(s, high + novel)), novel_year, {}))
        latent[doi] = s
    return PlantedCorpus(docs, high, low, neutral, novel, latent, int(cit_years[-1]))


def _noise_scale(label_noise: float) -> float:
    """Solve P(sign(s + sigma*e) != sign(s)) = label_noise for s ~ U(-1, 1), e ~ N(0, 1)."""
    if label_noise <= 0:
        return 0.0
    # flip probability is the integral of Phi(-x / sigma) over x in [0, 1]; increasing in sigma
    def flip(sig):
        xs = np.linspace(0.0, 1.0, 2001)
        return trapezoid(norm.cdf(-xs / sig), xs)

    lo, hi = 1e-6, 100.0
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if flip(mid) < label_noise else (lo, mid)
    return (lo + hi) / 2
