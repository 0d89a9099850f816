"""
Driving the pipeline from the command line
==========================================

The ``grguard`` command reads one JSON config. Endpoints given a
``mock_script`` are answered in-process, so this whole walk-through runs
offline. Each step calls the same entry point the console script uses.
"""

import json
import tempfile
from pathlib import Path

from grguard.cli import main
from grguard.evaluation import write_eval_set
from grguard.gateway import MockScript
from grguard.gateway.mock import write_script
from grguard.synthetic import make_scenario, oracle_decision_script, oracle_judge_script

root = Path(tempfile.mkdtemp(prefix="grguard-demo-"))
sc = make_scenario(n_docs=100, n_queries=20, k=5, seed=1)


def jsonl(name, rows):
    (root / name).write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


# %%
# Input files: catalog, query log, annotated positives, gold labels, and a
# script per model role.
jsonl("catalog.jsonl", [d.to_dict() for d in sc.catalog])
jsonl("query_log.jsonl", [{"query": e.query, "frequency": e.frequency} for e in sc.query_log])
jsonl("positives.jsonl", [{"query": p.query, "doc_id": p.doc_id} for p in sc.positives])
write_eval_set(sc.eval_set, root / "eval.jsonl")
write_script(oracle_judge_script(sc.eval_set, sc.catalog), root / "judge.json")
write_script(MockScript(default_reply="Attributes match the query intent."), root / "reasoner.json")
write_script(oracle_decision_script(sc.eval_set, sc.catalog), root / "decider.json")

config = {
    "seed": 1,
    "paths": {"catalog": "catalog.jsonl", "query_log": "query_log.jsonl", "positives": "positives.jsonl",
              "eval_set": "eval.jsonl", "output_dir": "out"},
    "endpoints": {"judge-a": {"mock_script": "judge.json"}, "judge-b": {"mock_script": "judge.json"},
                  "reasoner": {"mock_script": "reasoner.json"}, "decider": {"mock_script": "decider.json"}},
    "judges": ["judge-a", "judge-b"],
    "reasoner": "reasoner",
    "decider": "decider",
    "gr": {"backend": "stub", "stub": {"hallucination_rate": 0.3}},
    "gr_preliminary": {"backend": "stub", "stub": {"hallucination_rate": 0.5}},
    "sampling": {"n_per_stratum": 3},
}
cfg = root / "config.json"
cfg.write_text(json.dumps(config, ensure_ascii=False, indent=2), encoding="utf-8")

# %%
main(["config", "validate", "--config", str(cfg)])
main(["index", "--config", str(cfg)])
main(["distill", "--config", str(cfg)])
print((root / "out" / "stats.json").read_text(encoding="utf-8"))

# %%
main(["agent", "--config", str(cfg), "--query", sc.queries[0], "--query", sc.queries[1]])
main(["eval", "--config", str(cfg), "--ablate", "--sweep"])
print("outputs in", root / "out")
