"""Corpus ingestion and abstract preprocessing.

Raw corpora are JSON-lines files, one record per line::

    {"doi": "10.1/x", "abstract": "...", "pub_year": 2020, "citations": {"2021": 4}}

Preprocessing keeps ``-`` and ``/`` inside tokens (``covid-19``,
``lopinavir/ritonavir``), deletes all other punctuation, lowercases and drops
tokens that are plain numbers.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .errors import DataError

log = logging.getLogger(__name__)

MIN_YEAR, MAX_YEAR = 1900, 2100

TOO_SHORT_RAW = "too_short_raw"
LANGUAGE = "language"
TOO_SHORT_CLEAN = "too_short_clean"

_NUMBER = re.compile(r"^\d+$")
_KEEP = frozenset("-/")


@dataclass(frozen=True)
class RawRecord:
    doi: str
    abstract: str
    pub_year: int
    citations: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.doi:
            raise DataError("doi must be non-empty")
        if not MIN_YEAR <= self.pub_year <= MAX_YEAR:
            raise DataError(f"{self.doi}: pub_year {self.pub_year} outside [{MIN_YEAR}, {MAX_YEAR}]")
        for year, count in self.citations.items():
            if count < 0:
                raise DataError(f"{self.doi}: negative citation count for {year}")


@dataclass(frozen=True)
class Document:
    doi: str
    tokens: tuple[str, ...]
    pub_year: int
    citations: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.tokens:
            raise DataError(f"{self.doi}: document has no tokens")
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def cit(self, year: int) -> int:
        """Citations received in ``year``; missing entries count as zero."""
        return self.citations.get(year, 0)

    def with_tokens(self, tokens: Sequence[str]) -> "Document":
        return Document(self.doi, tuple(tokens), self.pub_year, self.citations)


@dataclass(frozen=True)
class Rejected:
    doi: str
    reason: str


def _accept_all(text: str) -> bool:
    return True


def _identity(token: str) -> str:
    return token


@dataclass(frozen=True)
class PipelineConfig:
    min_raw_chars: int = 10
    min_clean_chars: int = 20
    language_filter: Callable[[str], bool] = _accept_all
    normalizer: Callable[[str], str] = _identity

    def __post_init__(self):
        if self.min_raw_chars < 0 or self.min_clean_chars < 0:
            raise ValueError("character thresholds must be non-negative")


# ---------------------------------------------------------------------------
# ingestion


def _parse_citations(raw, where: str) -> dict[int, int]:
    if not isinstance(raw, dict):
        raise DataError(f"{where}: 'citations' must be an object")
    out = {}
    for key, value in raw.items():
        try:
            year = int(key)
        except (TypeError, ValueError):
            raise DataError(f"{where}: citation year {key!r} is not an integer") from None
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise DataError(f"{where}: citation count for {key} must be a non-negative integer")
        out[year] = value
    return out


def parse_record(obj, where: str = "record") -> RawRecord:
    if not isinstance(obj, dict):
        raise DataError(f"{where}: expected a JSON object")
    for key in ("doi", "abstract", "pub_year"):
        if key not in obj:
            raise DataError(f"{where}: missing field {key!r}")
    doi, abstract, year = obj["doi"], obj["abstract"], obj["pub_year"]
    if not isinstance(doi, str) or not doi:
        raise DataError(f"{where}: 'doi' must be a non-empty string")
    if not isinstance(abstract, str):
        raise DataError(f"{where}: 'abstract' must be a string")
    if isinstance(year, bool) or not isinstance(year, int):
        raise DataError(f"{where}: 'pub_year' must be an integer")
    try:
        return RawRecord(doi, abstract, year, _parse_citations(obj.get("citations", {}), where))
    except DataError as exc:
        raise DataError(f"{where}: {exc}") from None


def record_to_json(rec: RawRecord) -> dict:
    return {"doi": rec.doi, "abstract": rec.abstract, "pub_year": rec.pub_year,
            "citations": {str(y): c for y, c in sorted(rec.citations.items())}}


def _iter_jsonl(path: Path) -> Iterator[tuple[int, object]]:
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None


def ingest(path) -> list[RawRecord]:
    """Read a JSON-lines corpus; later records with an already seen doi are dropped."""
    path = Path(path)
    records, seen = [], set()
    for lineno, obj in _iter_jsonl(path):
        rec = parse_record(obj, f"{path}: line {lineno}")
        if rec.doi in seen:
            log.warning("%s: line %d: duplicate doi %s skipped", path, lineno, rec.doi)
            continue
        seen.add(rec.doi)
        records.append(rec)
    return records


# ---------------------------------------------------------------------------
# preprocessing


def strip_punctuation(text: str) -> str:
    # deleted rather than replaced by a space, so "B.1.1.529" -> "B11529"
    return "".join(ch for ch in text if ch.isalnum() or ch.isspace() or ch in _KEEP)


def tokenize(text: str, normalizer: Callable[[str], str] = _identity) -> list[str]:
    tokens = []
    for raw in strip_punctuation(text).lower().split():
        tok = raw.strip("-/")
        if not tok or _NUMBER.match(tok):
            continue
        tok = normalizer(tok)
        if tok and not any(ch.isspace() for ch in tok):
            tokens.append(tok)
    return tokens


def preprocess(record: RawRecord, cfg: PipelineConfig = PipelineConfig()) -> Document | Rejected:
    if len(record.abstract) <= cfg.min_raw_chars:
        return Rejected(record.doi, TOO_SHORT_RAW)
    if not cfg.language_filter(record.abstract):
        return Rejected(record.doi, LANGUAGE)
    tokens = tokenize(record.abstract, cfg.normalizer)
    if not tokens or len(" ".join(tokens)) < cfg.min_clean_chars:
        return Rejected(record.doi, TOO_SHORT_CLEAN)
    return Document(record.doi, tuple(tokens), record.pub_year, dict(record.citations))


def preprocess_all(records: Iterable[RawRecord], cfg: PipelineConfig = PipelineConfig()):
    """Return ``(documents, rejected)`` preserving input order."""
    docs, rejected = [], []
    for rec in records:
        out = preprocess(rec, cfg)
        (docs if isinstance(out, Document) else rejected).append(out)
    return docs, rejected


# ---------------------------------------------------------------------------
# tokenized document files


def document_to_json(doc: Document, **extra) -> dict:
    obj = {
        "doi": doc.doi,
        "tokens": list(doc.tokens),
        "pub_year": doc.pub_year,
        "citations": {str(y): c for y, c in sorted(doc.citations.items())},
    }
    obj.update(extra)
    return obj


def document_from_json(obj, where: str = "document") -> Document:
    if not isinstance(obj, dict):
        raise DataError(f"{where}: expected a JSON object")
    try:
        tokens = obj["tokens"]
        doi, year = obj["doi"], obj["pub_year"]
    except KeyError as exc:
        raise DataError(f"{where}: missing field {exc.args[0]!r}") from None
    if not isinstance(tokens, list) or not all(isinstance(t, str) and t for t in tokens):
        raise DataError(f"{where}: 'tokens' must be a list of non-empty strings")
    return Document(doi, tuple(tokens), int(year), _parse_citations(obj.get("citations", {}), where))


def read_documents(path) -> list[Document]:
    path = Path(path)
    return [document_from_json(obj, f"{path}: line {n}") for n, obj in _iter_jsonl(path)]


def read_jsonl(path) -> list[tuple[int, object]]:
    return list(_iter_jsonl(Path(path)))
