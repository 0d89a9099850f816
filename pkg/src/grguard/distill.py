"""Reasoning-distillation corpus construction.

Mines negatives from a generative retriever's own output with a unanimous
judge ensemble, pairs them with sampled annotated positives, asks a larger
model to explain each label, and writes the augmented training corpus
(original records followed by reasoning records) as JSON Lines.
"""

from __future__ import annotations

import json
import logging
import os
import random
import tempfile
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .catalog import Catalog, Document, ParseError, QueryLogEntry, _read_jsonl, normalize_docid
from .gateway.client import GatewayError
from .gateway.prompts import PromptId, PromptTemplate, load_template
from .gateway.roles import Completer, JudgeVerdict, Label, judge_relevance, reasoning_prompt
from .generative import GenerationResult

logger = logging.getLogger(__name__)

DEFAULT_NEGATIVES_PER_QUERY = 3


class Provenance(str, Enum):
    ANNOTATED_POSITIVE = "annotated_positive"
    MINED_NEGATIVE = "mined_negative"


@dataclass(frozen=True)
class LabeledPair:
    query: str
    doc_id: str
    label: Label
    provenance: Provenance

    def __post_init__(self):
        if (self.label is Label.POSITIVE) != (self.provenance is Provenance.ANNOTATED_POSITIVE):
            raise ValueError(f"label {self.label.value} inconsistent with provenance {self.provenance.value}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.query, self.doc_id)

    @classmethod
    def positive(cls, query: str, doc_id: str) -> "LabeledPair":
        return cls(query, normalize_docid(doc_id), Label.POSITIVE, Provenance.ANNOTATED_POSITIVE)

    @classmethod
    def negative(cls, query: str, doc_id: str) -> "LabeledPair":
        return cls(query, normalize_docid(doc_id), Label.NEGATIVE, Provenance.MINED_NEGATIVE)


@dataclass(frozen=True)
class ReasoningRecord:
    pair: LabeledPair
    reasoning: str
    generator: str
    prompt: str

    def __post_init__(self):
        if not self.reasoning.strip():
            raise ValueError("reasoning must be non-empty")


class RecordKind(str, Enum):
    QD_PAIR = "qd_pair"
    DOC_KNOWLEDGE = "doc_knowledge"
    REASONING = "reasoning"


@dataclass(frozen=True)
class TrainingRecord:
    kind: RecordKind
    input: str
    output: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.input or not self.output:
            raise ValueError("training records need non-empty input and output")

    def to_json(self) -> str:
        obj = {"kind": self.kind.value, "input": self.input, "output": self.output, "meta": self.meta}
        return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainingRecord":
        return cls(RecordKind(obj["kind"]), obj["input"], obj["output"], obj.get("meta", {}))


@dataclass
class PipelineStats:
    queries_processed: int = 0
    queries_skipped: int = 0
    generations: int = 0
    invalid_docids: int = 0
    judged_pairs: int = 0
    judge_calls: Counter = field(default_factory=Counter)
    unanimity_negatives: int = 0
    capped_negatives: int = 0
    unparseable_verdicts: int = 0
    reasoning_calls: int = 0
    skipped_pairs: int = 0
    records_emitted: Counter = field(default_factory=Counter)
    failures: list[str] = field(default_factory=list)

    def merge(self, other: "PipelineStats") -> "PipelineStats":
        for name, value in vars(other).items():
            mine = getattr(self, name)
            if isinstance(mine, Counter):
                mine.update(value)
            elif isinstance(mine, list):
                mine.extend(value)
            else:
                setattr(self, name, mine + value)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["judge_calls"] = dict(sorted(self.judge_calls.items()))
        d["records_emitted"] = dict(sorted(self.records_emitted.items()))
        return d


class GenerativeBackend(Protocol):
    def generate(self, q: str, k: int) -> GenerationResult: ...


def sample_queries(log: Sequence[QueryLogEntry], n_per_stratum: int, seed: int) -> list[str]:
    """Sample up to ``n_per_stratum`` queries from each frequency tertile.

    Entries are ranked by frequency (descending, ties by query text) and the
    ranking is split into three near-equal strata: high, middle, low.
    """
    if n_per_stratum <= 0:
        return []
    freq: dict[str, int] = {}
    for e in log:
        q = e.query.strip()
        if q:
            freq[q] = max(freq.get(q, 0), e.frequency)
    ranked = sorted(freq, key=lambda q: (-freq[q], q))
    n = len(ranked)
    bounds = [0, (n + 2) // 3, (2 * n + 2) // 3, n]
    rng = random.Random(seed)
    out: list[str] = []
    for lo, hi in zip(bounds, bounds[1:]):
        stratum = ranked[lo:hi]
        out.extend(rng.sample(stratum, min(n_per_stratum, len(stratum))))
    return list(dict.fromkeys(out))


def _judge_all(
    jobs: list[tuple[str, Document, Completer]],
    task_instruction: str,
    template: PromptTemplate,
    workers: int,
) -> dict[tuple[str, str, str], JudgeVerdict]:
    def run(job):
        q, doc, judge = job
        return (q, doc.doc_id, judge.name), judge_relevance(judge, q, doc, task_instruction, template)

    if workers <= 1:
        return dict(map(run, jobs))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return dict(pool.map(run, jobs))


def mine_negatives(
    queries: Iterable[str],
    gr_backend: GenerativeBackend,
    judges: Sequence[Completer],
    k: int,
    task_instruction: str = "",
    *,
    per_query_cap: int | None = DEFAULT_NEGATIVES_PER_QUERY,
    workers: int = 1,
    template: PromptTemplate | None = None,
) -> tuple[list[LabeledPair], PipelineStats]:
    """Label a generated document negative only if every judge says Irrelevant."""
    if not judges:
        raise ValueError("at least one judge is required")
    names = [j.name for j in judges]
    if len(set(names)) != len(names):
        raise ValueError(f"judge names must be unique: {names}")
    template = template or load_template(PromptId.RELEVANCE_JUDGEMENT)
    stats = PipelineStats()

    generations: list[GenerationResult] = []
    for q in dict.fromkeys(queries):
        try:
            gen = gr_backend.generate(q, k)
        except GatewayError as exc:
            stats.queries_skipped += 1
            stats.failures.append(f"generate {q!r}: {exc}")
            logger.warning("skipping query %r: %s", q, exc)
            continue
        stats.queries_processed += 1
        stats.generations += len(gen.raw_outputs)
        stats.invalid_docids += len(gen.invalid)
        generations.append(gen)

    jobs = [(g.query, d, j) for g in generations for d in g.resolved for j in judges]
    verdicts = _judge_all(jobs, task_instruction, template, workers)
    for (_, _, judge), verdict in sorted(verdicts.items()):
        stats.judge_calls[judge] += 1
        if verdict is JudgeVerdict.UNPARSEABLE:
            stats.unparseable_verdicts += 1

    negatives: list[LabeledPair] = []
    seen: set[tuple[str, str]] = set()
    for gen in generations:
        taken = 0
        for doc in gen.resolved:
            if (gen.query, doc.doc_id) in seen:
                continue
            seen.add((gen.query, doc.doc_id))
            stats.judged_pairs += 1
            if all(verdicts[(gen.query, doc.doc_id, n)] is JudgeVerdict.IRRELEVANT for n in names):
                stats.unanimity_negatives += 1
                if per_query_cap is not None and taken >= per_query_cap:
                    stats.capped_negatives += 1
                    continue
                negatives.append(LabeledPair.negative(gen.query, doc.doc_id))
                taken += 1
    return negatives, stats


def build_reasoning_source(
    positives_corpus: Sequence[LabeledPair],
    negatives: Sequence[LabeledPair],
    n_pos: int | None = None,
    seed: int = 0,
    negative_cap: int | None = None,
) -> list[LabeledPair]:
    """Seeded sample of positives plus the mined negatives, deduplicated.

    ``n_pos`` defaults to the number of negatives kept (1:1 balance). A pair
    that appears as both positive and negative is kept as the positive.
    """
    positives = list(dict.fromkeys(p for p in positives_corpus if p.label is Label.POSITIVE))
    pos_keys = {p.key for p in positives}
    negs = list(dict.fromkeys(n for n in negatives if n.key not in pos_keys))
    if negative_cap is not None:
        negs = negs[:negative_cap]
    if n_pos is None:
        n_pos = len(negs)
    sampled = random.Random(seed).sample(positives, min(n_pos, len(positives)))
    return list(dict.fromkeys(sampled + negs))


def generate_reasoning_batch(
    reasoner: Completer,
    pairs: Sequence[LabeledPair],
    *,
    catalog: Catalog | None = None,
    stats: PipelineStats | None = None,
    workers: int = 1,
    template: PromptTemplate | None = None,
) -> list[ReasoningRecord]:
    """One reasoning record per pair that yields non-empty text; failures are skipped."""
    template = template or load_template(PromptId.REASONING_GENERATION)
    stats = stats if stats is not None else PipelineStats()

    def title(pair: LabeledPair) -> str:
        doc = catalog.get(pair.doc_id) if catalog is not None else None
        return doc.title if doc is not None else pair.doc_id

    def run(pair: LabeledPair) -> ReasoningRecord | str:
        prompt = reasoning_prompt(pair.query, title(pair), pair.label, template)
        try:
            text = reasoner.complete(prompt).strip()
        except GatewayError as exc:
            return f"reasoning {pair.query!r}/{pair.doc_id!r}: {exc}"
        if not text:
            return f"reasoning {pair.query!r}/{pair.doc_id!r}: blank reply"
        return ReasoningRecord(pair, text, reasoner.name, prompt)

    if workers <= 1:
        results = [run(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, pairs))

    records = []
    for r in results:
        stats.reasoning_calls += 1
        if isinstance(r, str):
            stats.skipped_pairs += 1
            stats.failures.append(r)
        else:
            records.append(r)
    return records


def qd_pair_record(pair: LabeledPair, catalog: Catalog | None = None) -> TrainingRecord:
    doc = catalog.get(pair.doc_id) if catalog is not None else None
    return TrainingRecord(
        RecordKind.QD_PAIR,
        f"Search query: {pair.query}\nRetrieve the relevant product title.",
        doc.title if doc is not None else pair.doc_id,
        {"query": pair.query, "doc_id": pair.doc_id},
    )


def doc_knowledge_record(doc: Document) -> TrainingRecord:
    lines = [f"{k}: {v}" for k, v in doc.attributes.items() if v != "unknown"]
    return TrainingRecord(
        RecordKind.DOC_KNOWLEDGE,
        f"Product title: {doc.title}\nDescribe the product's structured attributes.",
        "\n".join(lines) or "unknown",
        {"doc_id": doc.doc_id},
    )


def base_corpus(positives: Sequence[LabeledPair], catalog: Catalog) -> list[TrainingRecord]:
    """The original training corpus: q-d pairs followed by per-document knowledge."""
    return [qd_pair_record(p, catalog) for p in positives] + [doc_knowledge_record(d) for d in catalog]


def reasoning_training_record(rec: ReasoningRecord) -> TrainingRecord:
    return TrainingRecord(
        RecordKind.REASONING,
        rec.prompt,
        rec.reasoning,
        {
            "query": rec.pair.query,
            "doc_id": rec.pair.doc_id,
            "label": rec.pair.label.value,
            "provenance": rec.pair.provenance.value,
            "generator": rec.generator,
        },
    )


def atomic_write_lines(path: str | Path, lines: Iterable[str]) -> None:
    """Write lines to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_corpus(
    T: Sequence[TrainingRecord],
    R: Sequence[ReasoningRecord],
    path: str | Path,
    stats: PipelineStats | None = None,
) -> PipelineStats:
    stats = stats if stats is not None else PipelineStats()
    records = list(T) + [reasoning_training_record(r) for r in R]
    atomic_write_lines(path, (r.to_json() for r in records))
    for r in records:
        stats.records_emitted[r.kind.value] += 1
    return stats


def load_corpus(path: str | Path) -> list[TrainingRecord]:
    return [TrainingRecord.from_dict(obj) for _, obj in _read_jsonl(path)]


def load_positives(path: str | Path, catalog: Catalog | None = None) -> list[LabeledPair]:
    """Read ``{query, doc_id}`` JSON Lines; DocIDs must resolve when a catalog is given."""
    pairs = []
    for lineno, obj in _read_jsonl(path):
        q, d = obj.get("query"), obj.get("doc_id")
        if not isinstance(q, str) or not isinstance(d, str) or not q.strip() or not d.strip():
            raise ParseError(lineno, "positives need non-empty 'query' and 'doc_id'")
        pair = LabeledPair.positive(q.strip(), d)
        if catalog is not None and pair.doc_id not in catalog:
            raise ParseError(lineno, f"doc_id {pair.doc_id!r} is not in the catalog")
        pairs.append(pair)
    return list(dict.fromkeys(pairs))
