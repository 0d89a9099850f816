"""Decision agent: expand generated results through a retrieval model, then
keep only candidates that every structured perspective confirms."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

from .catalog import UNKNOWN, Document
from .gateway.client import GatewayError
from .gateway.prompts import PromptId, PromptTemplate, load_template
from .gateway.roles import Completer, Decision, decide
from .generative import GenerationResult

logger = logging.getLogger(__name__)

RetrievalFn = Callable[[str, int], list[Document]]


class MissingFieldPolicy(str, Enum):
    PASS_THROUGH = "pass_through"
    EXCLUDE = "exclude"


@dataclass(frozen=True)
class AgentConfig:
    perspectives: tuple[str, ...]
    m: int = 3
    top_k_cap: int = 5
    missing_field_policy: MissingFieldPolicy = MissingFieldPolicy.PASS_THROUGH
    include_seed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "perspectives", tuple(self.perspectives))
        object.__setattr__(self, "missing_field_policy", MissingFieldPolicy(self.missing_field_policy))
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if self.top_k_cap < 1:
            raise ValueError("top_k_cap must be >= 1")
        if not self.perspectives:
            raise ValueError("at least one perspective is required")

    def with_cap(self, top_k_cap: int) -> "AgentConfig":
        return AgentConfig(self.perspectives, self.m, top_k_cap, self.missing_field_policy, self.include_seed)


@dataclass
class AgentTrace:
    query: str
    expansions: dict[str, list[str]] = field(default_factory=dict)
    candidates: list[str] = field(default_factory=list)
    retained: dict[str, list[str]] = field(default_factory=dict)
    degraded: list[str] = field(default_factory=list)
    hallucinated: dict[str, list[str]] = field(default_factory=dict)
    final: list[str] = field(default_factory=list)
    drop_reasons: dict[str, list[str]] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(vars(self), ensure_ascii=False, sort_keys=True)


def expand(seed: Document, rm: RetrievalFn, m: int, include_seed: bool = True) -> list[Document]:
    out = [seed] if include_seed else []
    if m > 0:
        # one extra slot because the seed usually retrieves itself first
        hits = [d for d in rm(seed.title, m + 1) if d.doc_id != seed.doc_id][:m]
        out.extend(hits)
    return list({d.doc_id: d for d in out}.values())


def assemble_candidates(
    gen: GenerationResult, rm: RetrievalFn, cfg: AgentConfig, trace: AgentTrace | None = None
) -> list[Document]:
    pool: dict[str, Document] = {}
    for seed in gen.resolved:
        expanded = expand(seed, rm, cfg.m, cfg.include_seed)
        if trace is not None:
            trace.expansions[seed.doc_id] = [d.doc_id for d in expanded]
        for d in expanded:
            pool.setdefault(d.doc_id, d)
    candidates = list(pool.values())[: cfg.top_k_cap]
    if trace is not None:
        trace.candidates = [d.doc_id for d in candidates]
    return candidates


def _judge_perspective(
    q: str, candidates: Sequence[Document], persp: str, cfg: AgentConfig,
    decider: Completer, template: PromptTemplate,
) -> tuple[set[str], Decision | None, list[str]]:
    """Retained DocIDs for one perspective, the raw decision, and auto-dropped ids."""
    auto_keep, auto_drop, ask = set(), [], []
    for d in candidates:
        if d.attribute(persp) == UNKNOWN:
            if cfg.missing_field_policy is MissingFieldPolicy.PASS_THROUGH:
                auto_keep.add(d.doc_id)
            else:
                auto_drop.append(d.doc_id)
        else:
            ask.append(d)
    if not ask:
        return auto_keep, None, auto_drop
    decision = decide(decider, q, [(d.title, d.attribute(persp)) for d in ask], persp, template)
    kept = {d.doc_id for d in ask if d.title in decision.retained}
    return kept | auto_keep, decision, auto_drop


def filter_by_perspectives(
    q: str,
    candidates: Sequence[Document],
    cfg: AgentConfig,
    decider: Completer,
    *,
    template: PromptTemplate | None = None,
    workers: int = 1,
    trace: AgentTrace | None = None,
) -> tuple[list[Document], AgentTrace]:
    template = template or load_template(PromptId.DECISION)
    trace = trace if trace is not None else AgentTrace(q, candidates=[d.doc_id for d in candidates])
    if not candidates:
        return [], trace

    def run(persp: str):
        try:
            return persp, _judge_perspective(q, candidates, persp, cfg, decider, template)
        except GatewayError as exc:
            logger.warning("perspective %r degraded for %r: %s", persp, q, exc)
            return persp, None

    if workers > 1 and len(cfg.perspectives) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(cfg.perspectives))) as pool:
            outcomes = list(pool.map(run, cfg.perspectives))
    else:
        outcomes = [run(p) for p in cfg.perspectives]

    retained: dict[str, set[str]] = {}
    reasons: dict[str, list[str]] = {}
    for persp, outcome in outcomes:
        if outcome is None:
            retained[persp] = set()
            trace.degraded.append(persp)
        else:
            kept, decision, auto_drop = outcome
            retained[persp] = kept
            if decision is not None and decision.hallucinated:
                trace.hallucinated[persp] = list(decision.hallucinated)
            for doc_id in auto_drop:
                reasons.setdefault(doc_id, []).append(f"{persp}: missing attribute")
        trace.retained[persp] = [d.doc_id for d in candidates if d.doc_id in retained[persp]]

    final = []
    for d in candidates:
        missing = [p for p in cfg.perspectives if d.doc_id not in retained[p]]
        if missing:
            for p in missing:
                why = "degraded" if p in trace.degraded else "rejected"
                if f"{p}: missing attribute" not in reasons.get(d.doc_id, []):
                    reasons.setdefault(d.doc_id, []).append(f"{p}: {why}")
        else:
            final.append(d)
    trace.final = [d.doc_id for d in final]
    trace.drop_reasons = {k: v for k, v in reasons.items() if k not in trace.final}
    return final, trace


@dataclass
class FinalResult:
    query: str
    documents: list[Document]
    hallucinated: list[str] = field(default_factory=list)
    generation: GenerationResult | None = None
    trace: AgentTrace | None = None

    @property
    def titles(self) -> list[str]:
        return [d.title for d in self.documents]

    def output_ids(self) -> list[str]:
        """Everything shown to the user: DocIDs, then any invalid generated strings."""
        return [d.doc_id for d in self.documents] + list(self.hallucinated)


class Pipeline:
    """Generative retrieval followed (optionally) by the decision agent."""

    def __init__(
        self,
        backend,
        rm: RetrievalFn,
        cfg: AgentConfig,
        decider: Completer | None,
        *,
        gen_k: int | None = None,
        use_agent: bool = True,
        template: PromptTemplate | None = None,
        workers: int = 1,
    ):
        if use_agent and decider is None:
            raise ValueError("a decision model is required unless the agent is bypassed")
        self.backend = backend
        self.rm = rm
        self.cfg = cfg
        self.decider = decider
        self.gen_k = gen_k
        self.use_agent = use_agent
        self.template = template or load_template(PromptId.DECISION)
        self.workers = workers

    def run(self, q: str) -> FinalResult:
        k = self.gen_k or self.cfg.top_k_cap
        gen = self.backend.generate(q, k)
        K = self.cfg.top_k_cap
        if not self.use_agent:
            return FinalResult(q, gen.resolved[:K], gen.invalid_within(K), gen)
        trace = AgentTrace(q)
        candidates = assemble_candidates(gen, self.rm, self.cfg, trace)
        final, trace = filter_by_perspectives(
            q, candidates, self.cfg, self.decider, template=self.template, workers=self.workers, trace=trace
        )
        return FinalResult(q, final, [], gen, trace)

    def run_many(self, queries: Iterable[str], workers: int = 1) -> dict[str, FinalResult]:
        qs = list(dict.fromkeys(queries))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(self.run, qs))
        else:
            results = [self.run(q) for q in qs]
        return {r.query: r for r in sorted(results, key=lambda r: r.query)}
