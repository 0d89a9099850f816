"""Okapi BM25 over an in-memory inverted index.

Tokenization emits overlapping character bigrams for CJK runs and lowercased
alphanumeric words elsewhere. The idf term uses ``ln(1 + (N - df + .5)/(df + .5))``
so scores are never negative, even on tiny corpora.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .catalog import Catalog, Document, EmptyCatalog

INDEX_FORMAT = "grguard-bm25"
INDEX_VERSION = 1

_CJK = (
    "぀-ヿ"  # kana
    "㐀-䶿"
    "一-鿿"
    "가-힯"  # hangul syllables
    "豈-﫿"
    "\U00020000-\U0002ebef"
)
_TOKEN_RE = re.compile(f"([{_CJK}]+)|([^\\W_{_CJK}]+)")


class IndexOutOfRange(IndexError):
    pass


class InvalidArgument(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    terms: list[str] = []
    for m in _TOKEN_RE.finditer(text):
        run = m.group(1)
        if run is None:
            terms.append(m.group(2).lower())
        elif len(run) == 1:
            terms.append(run)
        else:
            terms.extend(run[i : i + 2] for i in range(len(run) - 1))
    return terms


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise InvalidArgument(f"k1 must be >= 0, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise InvalidArgument(f"b must be in [0, 1], got {self.b}")


class FieldSpec(str, Enum):
    """Which document fields feed the index."""

    TITLE = "title"
    TITLE_AND_ATTRIBUTES = "title+attributes"


def document_text(doc: Document, field_spec: FieldSpec | str = FieldSpec.TITLE) -> str:
    if FieldSpec(field_spec) is FieldSpec.TITLE:
        return doc.title
    values = [v for v in doc.attributes.values() if v != "unknown"]
    return " ".join([doc.title, *values])


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[int, int]]]
    doc_len: list[int]
    avgdl: float
    num_docs: int
    df: dict[str, int]
    doc_ids: list[str] = field(default_factory=list)

    @classmethod
    def from_token_lists(cls, docs: Sequence[Sequence[str]], doc_ids: Sequence[str]) -> "InvertedIndex":
        if not docs:
            raise EmptyCatalog("index input")
        postings: dict[str, list[tuple[int, int]]] = {}
        doc_len = []
        for i, terms in enumerate(docs):
            doc_len.append(len(terms))
            for term, tf in Counter(terms).items():
                postings.setdefault(term, []).append((i, tf))
        return cls(
            postings=postings,
            doc_len=doc_len,
            avgdl=math.fsum(doc_len) / len(docs),
            num_docs=len(docs),
            df={t: len(p) for t, p in postings.items()},
            doc_ids=list(doc_ids),
        )

    def tf(self, term: str, doc: int) -> int:
        for i, tf in self.postings.get(term, ()):
            if i == doc:
                return tf
        return 0

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        if df == 0:
            return 0.0
        return math.log(1.0 + (self.num_docs - df + 0.5) / (df + 0.5))


def build_index(catalog: Catalog, field_spec: FieldSpec | str = FieldSpec.TITLE) -> InvertedIndex:
    if len(catalog) == 0:
        raise EmptyCatalog()
    return InvertedIndex.from_token_lists(
        [tokenize(document_text(d, field_spec)) for d in catalog],
        [d.doc_id for d in catalog],
    )


def _term_weight(index: InvertedIndex, params: Bm25Params, tf: int, doc: int) -> float:
    if index.avgdl > 0:
        norm = 1.0 - params.b + params.b * index.doc_len[doc] / index.avgdl
    else:
        norm = 1.0
    return tf * (params.k1 + 1.0) / (tf + params.k1 * norm)


def bm25_score(index: InvertedIndex, params: Bm25Params, query_terms: Iterable[str], doc: int) -> float:
    if not 0 <= doc < index.num_docs:
        raise IndexOutOfRange(f"document index {doc} outside [0, {index.num_docs})")
    score = 0.0
    for term in query_terms:
        tf = index.tf(term, doc)
        if tf:
            score += index.idf(term) * _term_weight(index, params, tf, doc)
    return score


def retrieve(
    index: InvertedIndex,
    params: Bm25Params,
    query: str | Sequence[str],
    k: int,
) -> list[tuple[int, float]]:
    """Top-k documents with positive score; ties go to the smaller DocID."""
    if k < 1:
        raise InvalidArgument(f"k must be a positive integer, got {k}")
    terms = tokenize(query) if isinstance(query, str) else list(query)
    scores: dict[int, float] = {}
    # accumulate per query term in query order so each document's sum has
    # the same addition order as bm25_score
    for term in terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc, tf in plist:
            scores[doc] = scores.get(doc, 0.0) + idf * _term_weight(index, params, tf, doc)
    ranked = [(d, s) for d, s in scores.items() if s > 0]
    ranked.sort(key=lambda ds: (-ds[1], index.doc_ids[ds[0]] if index.doc_ids else ds[0]))
    return ranked[:k]


class Bm25Retriever:
    """Catalog-bound retrieval function: ``rm(query, k) -> [Document]``."""

    def __init__(self, catalog: Catalog, params: Bm25Params | None = None,
                 field_spec: FieldSpec | str = FieldSpec.TITLE):
        self.catalog = catalog
        self.params = params or Bm25Params()
        self.index = build_index(catalog, field_spec)

    def search(self, query: str, k: int) -> list[tuple[Document, float]]:
        return [(self.catalog[i], s) for i, s in retrieve(self.index, self.params, query, k)]

    def __call__(self, query: str, k: int) -> list[Document]:
        return [doc for doc, _ in self.search(query, k)]


def dump_index(index: InvertedIndex, path: str | Path) -> None:
    """Write the index as JSON Lines: a header line, then one line per term."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "num_docs": index.num_docs,
            "avgdl": index.avgdl,
            "doc_len": index.doc_len,
            "doc_ids": index.doc_ids,
        }
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for term in sorted(index.postings):
            row = {"term": term, "postings": index.postings[term]}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != INDEX_FORMAT or header.get("version") != INDEX_VERSION:
            raise ValueError(f"{path}: not a {INDEX_FORMAT} v{INDEX_VERSION} index file")
        postings = {}
        for line in fh:
            row = json.loads(line)
            postings[row["term"]] = [tuple(p) for p in row["postings"]]
    return InvertedIndex(
        postings=postings,
        doc_len=header["doc_len"],
        avgdl=header["avgdl"],
        num_docs=header["num_docs"],
        df={t: len(p) for t, p in postings.items()},
        doc_ids=header["doc_ids"],
    )
