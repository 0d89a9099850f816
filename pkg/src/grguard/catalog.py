"""Candidate document catalog: loading, validation and DocID resolution.

A document's identifier is its normalized title. Generated strings are
resolved by exact match on the normalized form only; anything else is an
``Invalid`` result that downstream code counts as a hallucination.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

UNKNOWN = "unknown"

DEFAULT_PERSPECTIVES = {
    "fund": ("company", "type", "risk"),
    "insurance": ("company", "type", "duration"),
    "other": ("company", "type", "duration", "risk"),
}


class CatalogError(Exception):
    """Base class for catalog loading failures."""


class DuplicateDocId(CatalogError):
    def __init__(self, doc_id: str, line: int | None = None):
        self.doc_id = doc_id
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate DocID {doc_id!r}{where}")


class ParseError(CatalogError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class EmptyCatalog(CatalogError):
    def __init__(self, what: str = "catalog"):
        super().__init__(f"{what} contains no documents")


class Scenario(str, Enum):
    FUND = "fund"
    INSURANCE = "insurance"
    OTHER = "other"


def normalize_docid(raw: str) -> str:
    """NFC-compose, trim, and collapse internal whitespace runs to one space."""
    return " ".join(unicodedata.normalize("NFC", raw).split())


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    attributes: Mapping[str, str] = field(default_factory=dict)
    scenario: Scenario = Scenario.OTHER

    def attribute(self, name: str) -> str:
        return self.attributes.get(name, UNKNOWN)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "attributes": dict(self.attributes),
            "scenario": self.scenario.value,
        }


@dataclass(frozen=True)
class Invalid:
    """A generated string that does not name any catalog document."""

    raw: str


@dataclass(frozen=True)
class QueryLogEntry:
    query: str
    frequency: int = 1


class Catalog:
    """Immutable, ordered collection of documents keyed by DocID."""

    def __init__(self, documents: Iterable[Document], perspectives: Iterable[str]):
        docs = tuple(documents)
        by_id: dict[str, int] = {}
        for i, doc in enumerate(docs):
            if doc.doc_id in by_id:
                raise DuplicateDocId(doc.doc_id)
            by_id[doc.doc_id] = i
        self.documents = docs
        self.by_id = MappingProxyType(by_id)
        self.perspectives = tuple(perspectives)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def __getitem__(self, index: int) -> Document:
        return self.documents[index]

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self.by_id

    def get(self, doc_id: str) -> Document | None:
        i = self.by_id.get(doc_id)
        return None if i is None else self.documents[i]

    def index_of(self, doc_id: str) -> int:
        return self.by_id[doc_id]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Catalog):
            return NotImplemented
        return self.documents == other.documents and self.perspectives == other.perspectives

    def __repr__(self) -> str:
        return f"Catalog(n={len(self.documents)}, perspectives={list(self.perspectives)})"


def make_document(
    title: str,
    attributes: Mapping[str, str] | None = None,
    scenario: str | Scenario = Scenario.OTHER,
    perspectives: Iterable[str] | None = None,
) -> Document:
    """Build a Document, filling perspectives missing from ``attributes`` with "unknown"."""
    attrs = {str(k): str(v).strip() or UNKNOWN for k, v in (attributes or {}).items()}
    for name in perspectives or ():
        attrs.setdefault(name, UNKNOWN)
    return Document(
        doc_id=normalize_docid(title),
        title=title,
        attributes=MappingProxyType(attrs),
        scenario=Scenario(scenario),
    )


def build_catalog(documents: Iterable[Document], perspectives: Iterable[str]) -> Catalog:
    catalog = Catalog(documents, perspectives)
    if not catalog.documents:
        raise EmptyCatalog()
    return catalog


def _read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ParseError(lineno, "expected a JSON object")
            yield lineno, obj


def load_catalog(path: str | Path, perspectives: Iterable[str] | None = None) -> Catalog:
    """Load a JSON Lines catalog.

    When ``perspectives`` is None the perspective list is taken from the
    defaults for the scenario of the first record.
    """
    docs: list[Document] = []
    seen: dict[str, int] = {}
    persp = tuple(perspectives) if perspectives is not None else None
    for lineno, obj in _read_jsonl(path):
        title = obj.get("title")
        if not isinstance(title, str):
            raise ParseError(lineno, "missing or non-string 'title'")
        attrs = obj.get("attributes", {})
        if not isinstance(attrs, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in attrs.items()
        ):
            raise ParseError(lineno, "'attributes' must map strings to strings")
        scenario = obj.get("scenario", Scenario.OTHER.value)
        try:
            scenario = Scenario(scenario)
        except ValueError:
            raise ParseError(lineno, f"unknown scenario {scenario!r}") from None
        if persp is None:
            persp = DEFAULT_PERSPECTIVES[scenario.value]
        doc = make_document(title, attrs, scenario, persp)
        if not doc.doc_id:
            raise ParseError(lineno, "title normalizes to an empty DocID")
        if doc.doc_id in seen:
            raise DuplicateDocId(doc.doc_id, lineno)
        seen[doc.doc_id] = lineno
        docs.append(doc)
    if not docs:
        raise EmptyCatalog()
    return Catalog(docs, persp or ())


def write_catalog(catalog: Catalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in catalog:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_query_log(path: str | Path) -> list[QueryLogEntry]:
    entries = []
    for lineno, obj in _read_jsonl(path):
        query = obj.get("query")
        if not isinstance(query, str) or not query.strip():
            raise ParseError(lineno, "missing or empty 'query'")
        freq = obj.get("frequency", 1)
        if not isinstance(freq, int) or isinstance(freq, bool) or freq < 0:
            raise ParseError(lineno, "'frequency' must be a non-negative integer")
        entries.append(QueryLogEntry(query.strip(), freq))
    return entries


def resolve(generated: str, catalog: Catalog) -> Document | Invalid:
    doc = catalog.get(normalize_docid(generated)) if generated else None
    return doc if doc is not None else Invalid(generated)
