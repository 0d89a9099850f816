"""Pipeline configuration: a JSON document validated before any side effect.

Schema (all paths relative to the config file's directory)::

    {
      "seed": 13,
      "workers": 4,
      "paths": {"catalog": ..., "query_log": ..., "positives": ..., "eval_set": ...,
                "training_corpus": ..., "output_dir": "out", "prompt_dir": ...},
      "endpoints": {"<name>": {"base_url": ..., "model_id": ..., "temperature": 0.0,
                               "max_output_tokens": 512, "timeout": 30, "max_retries": 3,
                               "max_in_flight": 8, "mock_script": <optional path>}},
      "judges": ["<name>", ...], "reasoner": "<name>", "decider": "<name>",
      "gr": {"backend": "stub" | "remote", "endpoint": "<name>",
             "stub": {"hallucination_rate": 0.3, "seed": 13, "k": 5}},
      "gr_preliminary": {same shape as "gr"},
      "bm25": {"k1": 1.2, "b": 0.75, "fields": "title" | "title+attributes"},
      "agent": {"m": 3, "top_k_cap": 5, "perspectives": [...],
                "missing_field_policy": "pass_through" | "exclude", "include_seed": true},
      "sampling": {"n_per_stratum": 10, "k": 5, "n_pos": null,
                   "negatives_per_query": 3, "task_instruction": ""}
    }

"gr_preliminary" is the retriever trained without the reasoning corpus. It
feeds negative mining and the "w/o reasoning" ablation; when absent, "gr" is
used for mining.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .agent import AgentConfig, MissingFieldPolicy
from .bm25 import Bm25Params, FieldSpec
from .distill import DEFAULT_NEGATIVES_PER_QUERY
from .gateway.client import ModelEndpoint
from .generative import StubConfig

STAGES = ("index", "distill", "agent", "eval")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GrBackendConfig:
    backend: str = "stub"
    endpoint: str | None = None
    stub: StubConfig = StubConfig()


@dataclass(frozen=True)
class SamplingConfig:
    n_per_stratum: int = 10
    k: int = 5
    n_pos: int | None = None
    negatives_per_query: int | None = DEFAULT_NEGATIVES_PER_QUERY
    task_instruction: str = ""


@dataclass
class PipelineConfig:
    seed: int
    base_dir: Path
    paths: dict[str, Path]
    endpoints: dict[str, ModelEndpoint]
    mock_scripts: dict[str, Path]
    judges: list[str]
    reasoner: str | None
    decider: str | None
    gr: GrBackendConfig
    gr_preliminary: GrBackendConfig | None
    bm25: Bm25Params
    fields: FieldSpec
    agent: dict[str, Any]
    sampling: SamplingConfig
    workers: int = 1
    raw: dict = field(default_factory=dict)

    @property
    def output_dir(self) -> Path:
        return self.paths.get("output_dir", self.base_dir / "out")

    def agent_config(self, perspectives: tuple[str, ...]) -> AgentConfig:
        a = dict(self.agent)
        a.setdefault("perspectives", perspectives)
        return AgentConfig(**a)


def _check_keys(section: str, obj: dict, allowed: set[str]) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"{section}: unknown keys {sorted(extra)}")


def _build(section: str, cls, obj: dict, **extra):
    if not isinstance(obj, dict):
        raise ConfigError(f"{section} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(section, obj, names - set(extra))
    try:
        return cls(**obj, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _gr(section: str, obj: Any, seed: int) -> GrBackendConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"{section} must be an object")
    _check_keys(section, obj, {"backend", "endpoint", "stub"})
    backend = obj.get("backend", "stub")
    if backend not in ("stub", "remote"):
        raise ConfigError(f"{section}.backend must be 'stub' or 'remote'")
    stub_obj = dict(obj.get("stub", {}))
    stub_obj.setdefault("seed", seed)
    stub = _build(f"{section}.stub", StubConfig, stub_obj)
    if backend == "remote" and not obj.get("endpoint"):
        raise ConfigError(f"{section}: remote backend needs an 'endpoint'")
    return GrBackendConfig(backend, obj.get("endpoint"), stub)


def parse_config(obj: dict, base_dir: str | Path = ".", seed_override: int | None = None) -> PipelineConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys("config", obj, {
        "seed", "workers", "paths", "endpoints", "judges", "reasoner", "decider",
        "gr", "gr_preliminary", "bm25", "agent", "sampling",
    })
    base_dir = Path(base_dir)
    seed = seed_override if seed_override is not None else obj.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("'seed' is required and must be an integer (no unseeded runs)")

    paths_obj = obj.get("paths", {})
    _check_keys("paths", paths_obj, {
        "catalog", "query_log", "positives", "eval_set", "training_corpus", "output_dir", "prompt_dir",
    })
    paths = {k: (base_dir / v) for k, v in paths_obj.items() if v is not None}

    endpoints, scripts = {}, {}
    for name, ep in obj.get("endpoints", {}).items():
        ep = dict(ep)
        if "mock_script" in ep:
            scripts[name] = base_dir / ep.pop("mock_script")
            ep.setdefault("base_url", "mock://")
            ep.setdefault("model_id", name)
        endpoints[name] = _build(f"endpoints.{name}", ModelEndpoint, ep, name=name)

    bm25_obj = dict(obj.get("bm25", {}))
    fields = bm25_obj.pop("fields", FieldSpec.TITLE.value)
    try:
        fields = FieldSpec(fields)
    except ValueError:
        raise ConfigError(f"bm25.fields: unknown field spec {fields!r}") from None

    agent_obj = dict(obj.get("agent", {}))
    _check_keys("agent", agent_obj, {f.name for f in dataclasses.fields(AgentConfig)})
    if "missing_field_policy" in agent_obj:
        try:
            MissingFieldPolicy(agent_obj["missing_field_policy"])
        except ValueError:
            raise ConfigError("agent.missing_field_policy must be 'pass_through' or 'exclude'") from None
    if "perspectives" in agent_obj:
        agent_obj["perspectives"] = tuple(agent_obj["perspectives"])
    try:
        AgentConfig(**{"perspectives": ("_",), **agent_obj})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"agent: {exc}") from None

    workers = obj.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("'workers' must be a positive integer")

    return PipelineConfig(
        seed=seed,
        base_dir=base_dir,
        paths=paths,
        endpoints=endpoints,
        mock_scripts=scripts,
        judges=list(obj.get("judges", [])),
        reasoner=obj.get("reasoner"),
        decider=obj.get("decider"),
        gr=_gr("gr", obj.get("gr", {}), seed),
        gr_preliminary=_gr("gr_preliminary", obj["gr_preliminary"], seed) if "gr_preliminary" in obj else None,
        bm25=_build("bm25", Bm25Params, bm25_obj),
        fields=fields,
        agent=agent_obj,
        sampling=_build("sampling", SamplingConfig, obj.get("sampling", {})),
        workers=workers,
        raw=obj,
    )


def load_config(path: str | Path, seed_override: int | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: file not found")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(obj, path.parent, seed_override)


_STAGE_PATHS = {
    "index": ("catalog",),
    "distill": ("catalog", "query_log", "positives"),
    "agent": ("catalog",),
    "eval": ("catalog",),
}


def validate(cfg: PipelineConfig, stage: str | None = None, *, ablate: bool = False, use_agent: bool = True) -> None:
    """Check references and files for ``stage`` (every stage when None)."""
    stages = STAGES if stage is None else (stage,)
    for name in ("query_log", "positives", "eval_set", "training_corpus", "catalog", "prompt_dir"):
        p = cfg.paths.get(name)
        if p is not None and not p.exists():
            raise ConfigError(f"paths.{name}: file not found: {p}")
    for s in stages:
        for name in _STAGE_PATHS[s]:
            if name not in cfg.paths:
                raise ConfigError(f"stage '{s}' needs paths.{name}")

    def need_endpoint(ref: str | None, what: str) -> None:
        if not ref:
            raise ConfigError(f"{what} endpoint is not configured")
        if ref not in cfg.endpoints:
            raise ConfigError(f"{what} refers to undefined endpoint {ref!r}")

    for name, script in cfg.mock_scripts.items():
        if not script.exists():
            raise ConfigError(f"endpoints.{name}.mock_script: file not found: {script}")
    for gr_name, gr in (("gr", cfg.gr), ("gr_preliminary", cfg.gr_preliminary)):
        if gr is not None and gr.backend == "remote":
            need_endpoint(gr.endpoint, gr_name)
    if "distill" in stages:
        if not cfg.judges:
            raise ConfigError("distill needs at least one judge in 'judges'")
        for j in cfg.judges:
            need_endpoint(j, "judges")
        if len(set(cfg.judges)) != len(cfg.judges):
            raise ConfigError("'judges' lists an endpoint twice")
        need_endpoint(cfg.reasoner, "reasoner")
    if ("agent" in stages and use_agent) or "eval" in stages:
        if use_agent or ablate:
            need_endpoint(cfg.decider, "decider")
    if "eval" in stages and stage == "eval":
        if "eval_set" not in cfg.paths:
            raise ConfigError("stage 'eval' needs paths.eval_set")
        if ablate and cfg.gr_preliminary is None:
            raise ConfigError("--ablate needs a 'gr_preliminary' backend for the w/o-reasoning run")
