"""Desk-scale synthetic data: an insurance-style catalog, queries, gold labels,
and scripted model behaviour that knows the gold labels.

Gold relevance is defined by construction as BM25's top-k for each query, so
an unperturbed stub retriever is always right and every stub perturbation is
a hallucination.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .bm25 import Bm25Retriever
from .catalog import Catalog, QueryLogEntry, Scenario, build_catalog, make_document
from .distill import LabeledPair
from .evaluation import EvalSet, Relevance
from .gateway.mock import MockScript, Rule

COMPANIES = ("平安", "国寿", "太保", "人保", "泰康", "众安", "新华", "友邦", "华泰", "阳光")
DURATIONS = {"单日": "one-day", "短期": "short-term", "一年期": "annual", "终身": "lifelong"}
TYPES = {"意外险": "accident", "医疗险": "medical", "重疾险": "critical-illness", "寿险": "life", "航空险": "aviation"}
RISKS = ("low", "medium", "high")
PERSPECTIVES = ("company", "type", "duration", "risk")


@dataclass
class DeskScenario:
    catalog: Catalog
    queries: list[str]
    eval_set: EvalSet
    query_log: list[QueryLogEntry]
    positives: list[LabeledPair]


def make_catalog(n_docs: int = 200, seed: int = 0, unknown_rate: float = 0.0) -> Catalog:
    """Up to 200 distinct company x duration x type products."""
    combos = list(itertools.product(COMPANIES, DURATIONS, TYPES))
    if n_docs > len(combos):
        raise ValueError(f"at most {len(combos)} synthetic documents")
    rng = random.Random(seed)
    docs = []
    for company, duration, kind in rng.sample(combos, n_docs):
        attrs = {
            "company": company,
            "type": TYPES[kind],
            "duration": DURATIONS[duration],
            "risk": rng.choice(RISKS),
        }
        for name in PERSPECTIVES:
            if rng.random() < unknown_rate:
                attrs[name] = "unknown"
        docs.append(make_document(f"{company}{duration}{kind}", attrs, Scenario.INSURANCE, PERSPECTIVES))
    return build_catalog(docs, PERSPECTIVES)


def make_queries(n_queries: int = 50, seed: int = 0) -> list[str]:
    pool = [d + t for d in DURATIONS for t in TYPES] + [c + t for c in COMPANIES for t in TYPES]
    return random.Random(seed).sample(pool, min(n_queries, len(pool)))


def gold_by_bm25(catalog: Catalog, queries: list[str], k: int, retriever: Bm25Retriever | None = None) -> EvalSet:
    """Every catalog document labeled, relevant iff in the query's BM25 top-k."""
    rm = retriever or Bm25Retriever(catalog)
    entries = {}
    for q in queries:
        top = {d.doc_id for d in rm(q, k)}
        entries[q] = {d.doc_id: Relevance.RELEVANT if d.doc_id in top else Relevance.IRRELEVANT for d in catalog}
    return EvalSet(entries, "insurance")


def make_scenario(n_docs: int = 200, n_queries: int = 50, k: int = 5, seed: int = 0) -> DeskScenario:
    catalog = make_catalog(n_docs, seed)
    queries = make_queries(n_queries, seed)
    eval_set = gold_by_bm25(catalog, queries, k)
    rng = random.Random(seed + 1)
    log = [QueryLogEntry(q, int(1000 / (rank + 1) ** 1.1) + rng.randrange(3)) for rank, q in enumerate(queries)]
    positives = [LabeledPair.positive(q, d) for q in queries for d in sorted(eval_set.relevant(q))]
    return DeskScenario(catalog, queries, eval_set, log, positives)


def decision_prefix(q: str) -> str:
    """Text that pins a rendered decision prompt to one query."""
    return f"Given the search query: {q}, the retrieved documents:"


def oracle_decision_script(eval_set: EvalSet, catalog: Catalog) -> MockScript:
    """Decision model that names exactly the gold-relevant titles, for any perspective."""
    rules = []
    for q in eval_set.queries:
        titles = [catalog.get(d).title for d in sorted(eval_set.relevant(q))]
        rules.append(Rule("substring", decision_prefix(q), "\n".join(titles) or "NONE"))
    return MockScript(tuple(rules), default_reply="NONE")


def oracle_judge_script(eval_set: EvalSet, catalog: Catalog) -> MockScript:
    """Relevance judge that answers from the gold labels."""
    rules = []
    for q, labels in eval_set.entries.items():
        for doc_id, rel in labels.items():
            title = catalog.get(doc_id).title
            pattern = f"the search query: {q}, please identify if the retrieved document {title} is relevant"
            reply = "RELEVANT" if rel is Relevance.RELEVANT else "IRRELEVANT"
            rules.append(Rule("substring", pattern, reply))
    return MockScript(tuple(rules), default_reply="UNSURE")
