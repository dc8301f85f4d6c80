"""Binary citation targets, the highly-cited set and word-level actual impact."""

from __future__ import annotations

import statistics
from collections import defaultdict
from dataclasses import dataclass
from typing import Collection, Iterable, Sequence

from .corpus import Document, document_from_json, document_to_json, read_jsonl
from .errors import DataError, UndefinedValueError


@dataclass(frozen=True)
class LabelSpec:
    pub_years: frozenset[int]
    cit_year: int

    def __init__(self, pub_years: Iterable[int], cit_year: int):
        years = frozenset(int(y) for y in pub_years)
        if not years:
            raise ValueError("pub_years must be non-empty")
        object.__setattr__(self, "pub_years", years)
        object.__setattr__(self, "cit_year", int(cit_year))


@dataclass(frozen=True)
class LabeledDoc:
    doc: Document
    y: int

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y!r}")


def in_scope(docs: Iterable[Document], pub_years: Collection[int] | None) -> list[Document]:
    if pub_years is None:
        return list(docs)
    return [d for d in docs if d.pub_year in pub_years]


def derive_labels(docs: Sequence[Document], spec: LabelSpec) -> list[LabeledDoc]:
    """Label in-scope documents 1 iff their citations in ``spec.cit_year``
    strictly exceed the median over the scope.

    Documents published outside ``spec.pub_years`` are dropped.
    """
    scope = in_scope(docs, spec.pub_years)
    if not scope:
        raise DataError(f"no documents published in {sorted(spec.pub_years)}")
    median = statistics.median(d.cit(spec.cit_year) for d in scope)
    return [LabeledDoc(d, int(d.cit(spec.cit_year) > median)) for d in scope]


def highly_cited_set(docs: Sequence[Document], pub_years: Collection[int], cit_year: int) -> set[str]:
    return {ld.doc.doi for ld in derive_labels(docs, LabelSpec(pub_years, cit_year)) if ld.y}


def act_impact(word: str, docs: Iterable[Document], H: Collection[str], pub_years=None) -> float:
    """Share of the in-scope documents containing ``word`` that are in ``H``."""
    hosts = [d for d in in_scope(docs, pub_years) if word in d.tokens]
    if not hosts:
        raise UndefinedValueError(f"word {word!r} occurs in no in-scope document")
    return sum(d.doi in H for d in hosts) / len(hosts)


def act_impact_table(docs: Iterable[Document], H: Collection[str], pub_years=None) -> dict[str, float]:
    """:func:`act_impact` for every word occurring in the scope, in one pass."""
    hosts: dict[str, int] = defaultdict(int)
    high: dict[str, int] = defaultdict(int)
    for d in in_scope(docs, pub_years):
        hit = d.doi in H
        for w in set(d.tokens):
            hosts[w] += 1
            high[w] += hit
    return {w: high[w] / n for w, n in hosts.items()}


def p_high(docs: Iterable[Document], pub_years: Collection[int], H: Collection[str]) -> float:
    scope = in_scope(docs, pub_years)
    if not scope:
        raise DataError(f"no documents published in {sorted(pub_years)}")
    return sum(d.doi in H for d in scope) / len(scope)


# labeled document files: document records with an extra integer "label"


def labeled_to_json(ld: LabeledDoc) -> dict:
    return document_to_json(ld.doc, label=ld.y)


def read_labeled(path) -> list[LabeledDoc]:
    out = []
    for lineno, obj in read_jsonl(path):
        where = f"{path}: line {lineno}"
        doc = document_from_json(obj, where)
        label = obj.get("label")
        if isinstance(label, bool) or label not in (0, 1):
            raise DataError(f"{where}: 'label' must be 0 or 1")
        out.append(LabeledDoc(doc, label))
    return out
