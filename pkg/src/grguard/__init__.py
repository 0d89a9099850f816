"""Hallucination mitigation for LLM-based generative retrieval.

Negative mining with a unanimous judge ensemble, reasoning-distillation
corpus construction, a retrieval-expansion decision agent, and an
evaluation harness, all testable offline against scripted model endpoints.
"""

from .agent import AgentConfig, AgentTrace, FinalResult, Pipeline, assemble_candidates, expand, filter_by_perspectives
from .bm25 import Bm25Params, Bm25Retriever, InvertedIndex, bm25_score, build_index, retrieve, tokenize
from .catalog import Catalog, Document, Invalid, QueryLogEntry, load_catalog, normalize_docid, resolve
from .distill import (
    LabeledPair,
    PipelineStats,
    ReasoningRecord,
    TrainingRecord,
    build_reasoning_source,
    emit_corpus,
    generate_reasoning_batch,
    mine_negatives,
    sample_queries,
)
from .evaluation import EvalReport, EvalSet, accuracy, run_ablation, topk_sweep
from .generative import GenerationResult, RemoteBackend, StubBackend, StubConfig, parse_generation

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "AgentTrace",
    "FinalResult",
    "Pipeline",
    "assemble_candidates",
    "expand",
    "filter_by_perspectives",
    "Bm25Params",
    "Bm25Retriever",
    "InvertedIndex",
    "bm25_score",
    "build_index",
    "retrieve",
    "tokenize",
    "Catalog",
    "Document",
    "Invalid",
    "QueryLogEntry",
    "load_catalog",
    "normalize_docid",
    "resolve",
    "LabeledPair",
    "PipelineStats",
    "ReasoningRecord",
    "TrainingRecord",
    "build_reasoning_source",
    "emit_corpus",
    "generate_reasoning_batch",
    "mine_negatives",
    "sample_queries",
    "EvalReport",
    "EvalSet",
    "accuracy",
    "run_ablation",
    "topk_sweep",
    "GenerationResult",
    "RemoteBackend",
    "StubBackend",
    "StubConfig",
    "parse_generation",
]
