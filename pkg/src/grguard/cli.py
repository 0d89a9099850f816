"""``grguard`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import distill as D
from .agent import Pipeline
from .bm25 import Bm25Retriever, dump_index
from .catalog import Catalog, CatalogError, load_catalog, load_query_log
from .config import ConfigError, GrBackendConfig, PipelineConfig, load_config, validate
from .evaluation import (
    DEFAULT_SWEEP_KS,
    EvalReport,
    UndefinedMetric,
    evaluate,
    format_table,
    load_eval_set,
    run_ablation,
    topk_sweep,
    write_reports,
)
from .gateway import ChatClient, GatewayError, ScriptedClient, ScriptError, load_script, serve_mock
from .gateway.mock import PortInUse
from .gateway.prompts import PromptId, default_templates
from .generative import RemoteBackend, StubBackend

logger = logging.getLogger("grguard")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Runtime:
    """Objects built from a validated config; clients are created lazily."""

    def __init__(self, cfg: PipelineConfig, mock_script: Path | None = None):
        self.cfg = cfg
        self.catalog: Catalog = load_catalog(cfg.paths["catalog"])
        self.retriever = Bm25Retriever(self.catalog, cfg.bm25, cfg.fields)
        self.templates = default_templates(cfg.paths.get("prompt_dir"))
        self._override = load_script(mock_script) if mock_script else None
        self._clients: dict = {}

    def client(self, name: str):
        if name not in self._clients:
            if self._override is not None:
                self._clients[name] = ScriptedClient(self._override, name)
            elif name in self.cfg.mock_scripts:
                self._clients[name] = ScriptedClient(load_script(self.cfg.mock_scripts[name]), name)
            else:
                self._clients[name] = ChatClient(self.cfg.endpoints[name])
        return self._clients[name]

    def backend(self, gr: GrBackendConfig):
        if gr.backend == "remote":
            return RemoteBackend(self.client(gr.endpoint), self.catalog, self.templates[PromptId.GENERATION])
        return StubBackend(self.catalog, gr.stub, self.retriever)

    def agent_config(self, top_k_cap: int | None = None):
        cfg = self.cfg.agent_config(self.catalog.perspectives)
        return cfg if top_k_cap is None else cfg.with_cap(top_k_cap)

    def pipeline(self, *, use_agent: bool = True, preliminary: bool = False, top_k_cap: int | None = None) -> Pipeline:
        gr = self.cfg.gr_preliminary if preliminary else self.cfg.gr
        return Pipeline(
            self.backend(gr),
            self.retriever,
            self.agent_config(top_k_cap),
            self.client(self.cfg.decider) if use_agent else None,
            gen_k=gr.stub.k if gr.backend == "stub" else None,
            use_agent=use_agent,
            template=self.templates[PromptId.DECISION],
            workers=self.cfg.workers,
        )

    def close(self) -> None:
        for c in self._clients.values():
            c.close()


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path, help="pipeline config JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--output", type=Path, help="output directory (overrides paths.output_dir)")
    p.add_argument("--workers", type=int, help="worker threads (overrides config)")
    p.add_argument("--mock-script", type=Path, help="answer every endpoint from this script, in-process")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grguard", description="Generative-retrieval hallucination toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="build the BM25 index and print corpus stats")
    _common(p)
    p.add_argument("--dump", type=Path, help="write the index as JSON Lines")

    p = sub.add_parser("distill", help="mine negatives, generate reasoning, write the augmented corpus")
    _common(p)

    p = sub.add_parser("agent", help="run generative retrieval plus the decision agent")
    _common(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--query", action="append", help="query text (repeatable)")
    g.add_argument("--queries", type=Path, help="file with one query per line")
    p.add_argument("--no-agent", action="store_true", help="print resolved GR output directly")
    p.add_argument("--trace", action="store_true", help="write agent traces as JSON Lines")

    p = sub.add_parser("eval", help="compute ACC, top-K sweeps and ablations")
    _common(p)
    p.add_argument("--eval-set", type=Path, help="eval set JSON Lines (overrides paths.eval_set)")
    p.add_argument("--sweep", action="store_true")
    p.add_argument("--ks", default=",".join(map(str, DEFAULT_SWEEP_KS)), help="comma-separated Top-K values")
    p.add_argument("--ablate", action="store_true")
    p.add_argument("--no-agent", action="store_true")
    p.add_argument("--macro", action="store_true", help="macro-average ACC over queries")

    p = sub.add_parser("mock-serve", help="serve a scripted chat-completions endpoint")
    p.add_argument("--mock-script", required=True, type=Path)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")

    p = sub.add_parser("config", help="configuration utilities")
    csub = p.add_subparsers(dest="config_command", required=True, parser_class=_Parser)
    v = csub.add_parser("validate", help="validate a config without side effects")
    _common(v)
    v.add_argument("--stage", choices=["index", "distill", "agent", "eval"])
    return parser


def _load(args, stage: str | None, **kw) -> PipelineConfig:
    cfg = load_config(args.config, args.seed)
    if getattr(args, "output", None):
        cfg.paths["output_dir"] = args.output
    if getattr(args, "workers", None):
        if args.workers < 1:
            raise ConfigError("--workers must be positive")
        cfg.workers = args.workers
    if getattr(args, "eval_set", None):
        cfg.paths["eval_set"] = args.eval_set
    validate(cfg, stage, **kw)
    if args.mock_script is not None and not args.mock_script.exists():
        raise ConfigError(f"--mock-script: file not found: {args.mock_script}")
    return cfg


def _write_json(path: Path, obj) -> None:
    D.atomic_write_lines(path, [json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True)])


def cmd_index(args) -> int:
    cfg = _load(args, "index")
    rt = Runtime(cfg, args.mock_script)
    idx = rt.retriever.index
    print(f"num_docs={idx.num_docs} vocabulary={len(idx.df)} avgdl={idx.avgdl:.4f}")
    if args.dump:
        dump_index(idx, args.dump)
        print(f"index written to {args.dump}")
    return EXIT_OK


def cmd_distill(args) -> int:
    cfg = _load(args, "distill")
    rt = Runtime(cfg, args.mock_script)
    try:
        s = cfg.sampling
        log = load_query_log(cfg.paths["query_log"])
        positives = D.load_positives(cfg.paths["positives"], rt.catalog)
        queries = D.sample_queries(log, s.n_per_stratum, cfg.seed)
        backend = rt.backend(cfg.gr_preliminary or cfg.gr)
        negatives, stats = D.mine_negatives(
            queries, backend, [rt.client(j) for j in cfg.judges], s.k, s.task_instruction,
            per_query_cap=s.negatives_per_query, workers=cfg.workers,
            template=rt.templates[PromptId.RELEVANCE_JUDGEMENT],
        )
        pairs = D.build_reasoning_source(positives, negatives, s.n_pos, cfg.seed)
        records = D.generate_reasoning_batch(
            rt.client(cfg.reasoner), pairs, catalog=rt.catalog, stats=stats, workers=cfg.workers,
            template=rt.templates[PromptId.REASONING_GENERATION],
        )
        if "training_corpus" in cfg.paths:
            T = D.load_corpus(cfg.paths["training_corpus"])
        else:
            T = D.base_corpus(positives, rt.catalog)
        out = cfg.output_dir
        D.emit_corpus(T, records, out / "corpus.jsonl", stats)
        _write_json(out / "stats.json", stats.to_dict())
        D.atomic_write_lines(out / "failures.log", stats.failures)
    finally:
        rt.close()
    print(f"queries={stats.queries_processed} negatives={len(negatives)} reasoning={len(records)} "
          f"records={sum(stats.records_emitted.values())} -> {out / 'corpus.jsonl'}")
    return EXIT_OK


def _read_queries(args) -> list[str]:
    if args.query:
        return [q.strip() for q in args.query if q.strip()]
    lines = args.queries.read_text(encoding="utf-8").splitlines()
    return [q.strip() for q in lines if q.strip()]


def cmd_agent(args) -> int:
    cfg = _load(args, "agent", use_agent=not args.no_agent)
    if args.queries is not None and not args.queries.exists():
        raise ConfigError(f"--queries: file not found: {args.queries}")
    rt = Runtime(cfg, args.mock_script)
    try:
        pipe = rt.pipeline(use_agent=not args.no_agent)
        results = pipe.run_many(_read_queries(args), workers=cfg.workers)
    finally:
        rt.close()
    for q, res in results.items():
        print(f"{q}\t{'; '.join(res.titles)}")
    if args.trace and not args.no_agent:
        path = cfg.output_dir / "agent_trace.jsonl"
        D.atomic_write_lines(path, [r.trace.to_json() for r in results.values() if r.trace])
        print(f"trace written to {path}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load(args, "eval", ablate=args.ablate, use_agent=not args.no_agent)
    try:
        ks = [int(k) for k in args.ks.split(",") if k.strip()]
    except ValueError:
        raise UsageError(f"--ks must be comma-separated integers, got {args.ks!r}") from None
    rt = Runtime(cfg, args.mock_script)
    eval_set = load_eval_set(cfg.paths["eval_set"])
    eval_set.validate(rt.catalog)
    reports: list[EvalReport] = []
    try:
        if args.ablate:
            reports += run_ablation(
                lambda reasoning, agent: rt.pipeline(use_agent=agent, preliminary=not reasoning),
                eval_set, rt.catalog, workers=cfg.workers,
            )
        else:
            report, _ = evaluate(rt.pipeline(use_agent=not args.no_agent), eval_set, rt.catalog,
                                 system="full" if not args.no_agent else "w/o decision agent",
                                 workers=cfg.workers, macro=args.macro)
            reports.append(report)
        if args.sweep:
            reports.append(topk_sweep(lambda K: rt.pipeline(top_k_cap=K), ks, eval_set, rt.catalog,
                                      workers=cfg.workers, system="top-k sweep"))
    finally:
        rt.close()
    print(format_table(reports))
    path = cfg.output_dir / "eval_report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_reports(reports, path)
    print(f"report written to {path}", file=sys.stderr)
    return EXIT_OK


def cmd_mock_serve(args) -> int:
    server = serve_mock(args.port, args.mock_script, host=args.host)
    print(f"mock chat-completions server on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _load(args, args.stage)
    load_catalog(cfg.paths["catalog"])
    print(f"config OK (seed={cfg.seed}, endpoints={sorted(cfg.endpoints)})")
    return EXIT_OK


COMMANDS = {
    "index": cmd_index,
    "distill": cmd_distill,
    "agent": cmd_agent,
    "eval": cmd_eval,
    "mock-serve": cmd_mock_serve,
    "config": cmd_config,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CatalogError, ScriptError, UsageError, FileNotFoundError) as exc:
        print(f"grguard: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GatewayError, UndefinedMetric, PortInUse, OSError) as exc:
        print(f"grguard: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
