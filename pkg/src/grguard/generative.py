"""Generative-retriever backends.

``RemoteBackend`` asks a fine-tuned model endpoint for DocIDs. ``StubBackend``
is a deterministic test double: it returns BM25's top-k and, with a seeded
per-slot probability, swaps the slot for a hallucination, either a near-miss
title that is not in the catalog or a real document from far down the
BM25 ranking.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from .bm25 import Bm25Retriever
from .catalog import Catalog, Document, Invalid, normalize_docid, resolve
from .gateway.prompts import PromptId, PromptTemplate, load_template
from .gateway.roles import Completer

_SPLIT_RE = re.compile(r"[\n;；]")

NEAR_MISS = "near_miss"
OFF_TOPIC = "off_topic"


def parse_generation(text: str) -> list[str]:
    out: dict[str, None] = {}
    for piece in _SPLIT_RE.split(text):
        piece = piece.strip()
        if piece:
            out.setdefault(piece)
    return list(out)


@dataclass
class SlotTrace:
    """What the stub did at one output position."""

    slot: int
    original: str
    emitted: str
    perturbation: str | None = None

    @property
    def perturbed(self) -> bool:
        return self.perturbation is not None


@dataclass
class GenerationResult:
    query: str
    raw_outputs: list[str]
    resolved: list[Document]
    invalid: list[str]
    duplicates: int = 0
    slots: list[SlotTrace] = field(default_factory=list)

    @classmethod
    def from_raw(cls, query: str, raw_outputs: list[str], catalog: Catalog,
                 slots: list[SlotTrace] | None = None) -> "GenerationResult":
        seen: set[str] = set()
        kept, resolved, invalid = [], [], []
        for raw in raw_outputs:
            key = normalize_docid(raw)
            if key in seen:
                continue
            seen.add(key)
            kept.append(raw)
            hit = resolve(raw, catalog)
            if isinstance(hit, Invalid):
                invalid.append(raw)
            else:
                resolved.append(hit)
        return cls(query, kept, resolved, invalid, len(raw_outputs) - len(kept), slots or [])

    def invalid_within(self, k: int) -> list[str]:
        """Invalid strings among the first ``k`` generated outputs."""
        bad = set(self.invalid)
        return [raw for raw in self.raw_outputs[:k] if raw in bad]


class RemoteBackend:
    def __init__(self, client: Completer, catalog: Catalog, template: PromptTemplate | None = None):
        self.client = client
        self.catalog = catalog
        self.template = template or load_template(PromptId.GENERATION)

    def generate(self, q: str, k: int) -> GenerationResult:
        if k < 1:
            raise ValueError("k must be positive")
        text = self.client.complete(self.template.render(q=q, k=str(k)))
        return GenerationResult.from_raw(q, parse_generation(text)[:k], self.catalog)


@dataclass(frozen=True)
class StubConfig:
    hallucination_rate: float = 0.0
    seed: int = 0
    k: int = 5
    near_miss_share: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.hallucination_rate <= 1.0:
            raise ValueError("hallucination_rate must be in [0, 1]")
        if not 0.0 <= self.near_miss_share <= 1.0:
            raise ValueError("near_miss_share must be in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be positive")


class StubBackend:
    def __init__(self, catalog: Catalog, config: StubConfig = StubConfig(),
                 retriever: Bm25Retriever | None = None):
        self.catalog = catalog
        self.config = config
        self.retriever = retriever or Bm25Retriever(catalog)

    def _rng(self, q: str, slot: int) -> random.Random:
        # string seeds hash through sha512, so this is stable across processes
        return random.Random(f"{self.config.seed}\x1f{q}\x1f{slot}")

    def _near_miss(self, title: str, rng: random.Random, taken: set[str]) -> str:
        chars = list(title)
        for _ in range(32):
            op = rng.randrange(3)
            s = chars[:]
            if op == 0 and len(s) > 1:
                del s[rng.randrange(len(s))]
            elif op == 1 and len(s) > 1:
                i = rng.randrange(len(s) - 1)
                s[i], s[i + 1] = s[i + 1], s[i]
            else:
                s.insert(rng.randrange(len(s) + 1), rng.choice(chars or ["x"]))
            cand = "".join(s)
            key = normalize_docid(cand)
            if key and key not in self.catalog and key not in taken:
                return cand
        n = 0
        while True:
            cand = f"{title}·{n}"
            if normalize_docid(cand) not in self.catalog and normalize_docid(cand) not in taken:
                return cand
            n += 1

    def generate(self, q: str, k: int | None = None) -> GenerationResult:
        k = k or self.config.k
        top = self.retriever(q, k)
        far_ids = {d.doc_id for d in self.retriever(q, 3 * k)}
        outside = [d for d in self.catalog if d.doc_id not in far_ids]
        taken = {d.doc_id for d in top}
        raw: list[str] = []
        slots: list[SlotTrace] = []
        for i, doc in enumerate(top):
            rng = self._rng(q, i)
            emitted, kind = doc.title, None
            if rng.random() < self.config.hallucination_rate:
                pool = [d for d in outside if d.doc_id not in taken]
                if pool and rng.random() >= self.config.near_miss_share:
                    emitted, kind = rng.choice(pool).title, OFF_TOPIC
                else:
                    emitted, kind = self._near_miss(doc.title, rng, taken), NEAR_MISS
                taken.add(normalize_docid(emitted))
            raw.append(emitted)
            slots.append(SlotTrace(i, doc.title, emitted, kind))
        return GenerationResult.from_raw(q, raw, self.catalog, slots)
