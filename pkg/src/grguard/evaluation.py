"""Accuracy, top-K sweeps and ablations."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .agent import FinalResult, Pipeline
from .catalog import Catalog, ParseError, _read_jsonl, normalize_docid

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_KS = (1, 3, 5, 10, 20)


class UndefinedMetric(ArithmeticError):
    pass


class Relevance(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"


@dataclass
class EvalSet:
    entries: dict[str, dict[str, Relevance]]
    scenario: str = "other"

    @property
    def queries(self) -> list[str]:
        return list(self.entries)

    def validate(self, catalog: Catalog) -> None:
        for q, labels in self.entries.items():
            for doc_id in labels:
                if doc_id not in catalog:
                    raise ValueError(f"eval set labels unknown DocID {doc_id!r} for query {q!r}")

    def relevant(self, q: str) -> set[str]:
        return {d for d, r in self.entries.get(q, {}).items() if r is Relevance.RELEVANT}


def load_eval_set(path: str | Path, scenario: str = "other") -> EvalSet:
    entries: dict[str, dict[str, Relevance]] = {}
    for lineno, obj in _read_jsonl(path):
        q, labels = obj.get("query"), obj.get("labels", {})
        if not isinstance(q, str) or not q.strip() or not isinstance(labels, dict):
            raise ParseError(lineno, "eval entries need a 'query' string and a 'labels' object")
        try:
            parsed = {normalize_docid(d): Relevance(v) for d, v in labels.items()}
        except ValueError:
            raise ParseError(lineno, "labels must be 'relevant' or 'irrelevant'") from None
        entries.setdefault(q.strip(), {}).update(parsed)
    return EvalSet(entries, scenario)


def write_eval_set(eval_set: EvalSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q, labels in eval_set.entries.items():
            row = {"query": q, "labels": {d: r.value for d, r in labels.items()}}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


@dataclass
class AccuracyCounts:
    relevant: int = 0
    labeled: int = 0
    unjudged: int = 0
    hallucinated: int = 0
    queries: int = 0


def _outputs(result: FinalResult | Sequence[str]) -> list[str]:
    return result.output_ids() if isinstance(result, FinalResult) else list(result)


def accuracy(
    results: Mapping[str, FinalResult | Sequence[str]],
    gold: EvalSet,
    catalog: Catalog,
    *,
    macro: bool = False,
) -> tuple[float, AccuracyCounts]:
    """Fraction of labeled retrieved pairs that are relevant.

    Strings that do not name a catalog document are hallucinations and count
    as irrelevant; real documents without a gold label are unjudged and left
    out. ``macro`` averages per-query accuracy instead of pooling pairs.
    """
    counts = AccuracyCounts()
    per_query = []
    for q in sorted(results):
        rel = lab = 0
        for out in dict.fromkeys(normalize_docid(o) for o in _outputs(results[q])):
            if out not in catalog:
                counts.hallucinated += 1
                lab += 1
                continue
            label = gold.entries.get(q, {}).get(out)
            if label is None:
                counts.unjudged += 1
                continue
            lab += 1
            rel += label is Relevance.RELEVANT
        counts.relevant += rel
        counts.labeled += lab
        counts.queries += 1
        if lab:
            per_query.append(rel / lab)
    if counts.labeled == 0:
        raise UndefinedMetric("no retrieved pair carries a gold label")
    acc = sum(per_query) / len(per_query) if macro else counts.relevant / counts.labeled
    return acc, counts


@dataclass
class EvalReport:
    system: str
    acc: float | None
    judged: int = 0
    unjudged: int = 0
    hallucinated: int = 0
    curve: dict[int, float | None] = field(default_factory=dict)
    reasoning_corpus_used: bool = True
    decision_agent_used: bool = True
    relevant_retrieved: int = 0
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["curve"] = {str(k): v for k, v in self.curve.items()}
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        obj = dict(obj)
        obj["curve"] = {int(k): v for k, v in obj.get("curve", {}).items()}
        return cls(**obj)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)


def evaluate(
    pipeline: Pipeline,
    eval_set: EvalSet,
    catalog: Catalog,
    *,
    system: str = "full",
    workers: int = 1,
    macro: bool = False,
    reasoning_corpus_used: bool = True,
) -> tuple[EvalReport, dict[str, FinalResult]]:
    results = pipeline.run_many(eval_set.queries, workers=workers)
    acc, counts = accuracy(results, eval_set, catalog, macro=macro)
    report = EvalReport(
        system=system,
        acc=acc,
        judged=counts.labeled,
        unjudged=counts.unjudged,
        hallucinated=counts.hallucinated,
        reasoning_corpus_used=reasoning_corpus_used,
        decision_agent_used=pipeline.use_agent,
        relevant_retrieved=counts.relevant,
    )
    return report, results


def topk_sweep(
    pipeline_factory: Callable[[int], Pipeline],
    Ks: Iterable[int],
    eval_set: EvalSet,
    catalog: Catalog,
    *,
    workers: int = 1,
    system: str = "sweep",
) -> EvalReport:
    """ACC per candidate cap; a K whose run fails is recorded as a missing point."""
    Ks = list(Ks)
    if not Ks or any(k < 1 for k in Ks):
        raise ValueError("Ks must be a non-empty list of positive integers")
    report = EvalReport(system=system, acc=None)
    for K in Ks:
        try:
            pipe = pipeline_factory(K)
            results = pipe.run_many(eval_set.queries, workers=workers)
            acc, counts = accuracy(results, eval_set, catalog)
        except Exception as exc:  # noqa: BLE001 - a failed point must not sink the sweep
            logger.warning("sweep point K=%d failed: %s", K, exc)
            report.curve[K] = None
            report.notes.append(f"K={K}: {exc.__class__.__name__}: {exc}")
            continue
        report.curve[K] = acc
        report.notes.append(f"K={K}: relevant={counts.relevant} judged={counts.labeled}")
        report.decision_agent_used = pipe.use_agent
    return report


ABLATIONS = ("full", "w/o reasoning", "w/o decision agent")


def run_ablation(
    build_pipeline: Callable[[bool, bool], Pipeline],
    eval_set: EvalSet,
    catalog: Catalog,
    *,
    workers: int = 1,
) -> list[EvalReport]:
    """Full system, preliminary retriever, and agent bypass.

    ``build_pipeline(reasoning_corpus_used, use_agent)`` returns the pipeline
    for one variant.
    """
    variants = [(ABLATIONS[0], True, True), (ABLATIONS[1], False, True), (ABLATIONS[2], True, False)]
    reports = []
    for name, with_reasoning, with_agent in variants:
        report, _ = evaluate(
            build_pipeline(with_reasoning, with_agent), eval_set, catalog,
            system=name, workers=workers, reasoning_corpus_used=with_reasoning,
        )
        reports.append(report)
    return reports


def format_table(reports: Sequence[EvalReport]) -> str:
    def pct(x):
        return "   n/a" if x is None else f"{100 * x:6.2f}%"

    lines = [f"{'system':<22} {'ACC':>8} {'judged':>7} {'unjudged':>9} {'halluc.':>8}"]
    for r in reports:
        lines.append(f"{r.system:<22} {pct(r.acc):>8} {r.judged:>7} {r.unjudged:>9} {r.hallucinated:>8}")
        for k, v in r.curve.items():
            lines.append(f"  top-{k:<17} {pct(v):>8}")
    return "\n".join(lines)


def write_reports(reports: Sequence[EvalReport], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([r.to_dict() for r in reports], ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_reports(path: str | Path) -> list[EvalReport]:
    return [EvalReport.from_dict(o) for o in json.loads(Path(path).read_text(encoding="utf-8"))]
