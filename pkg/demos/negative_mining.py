"""
Mining hard negatives and building a reasoning corpus
=====================================================

A generative retriever proposes documents for sampled queries. A pair
becomes a training negative only when every judge calls it irrelevant. A
reasoner then explains each sampled positive and negative, and those
explanations are appended to the original training corpus.
"""

import tempfile
from pathlib import Path

from grguard.distill import (
    base_corpus,
    build_reasoning_source,
    emit_corpus,
    generate_reasoning_batch,
    load_corpus,
    mine_negatives,
    sample_queries,
)
from grguard.gateway import MockScript, ScriptedClient
from grguard.generative import StubBackend, StubConfig
from grguard.synthetic import make_scenario, oracle_judge_script

# %%
# The synthetic scenario gives a catalog, a query log with a long-tailed
# frequency profile, and gold labels.
scenario = make_scenario(n_docs=120, n_queries=30, k=5, seed=4)
queries = sample_queries(scenario.query_log, n_per_stratum=4, seed=4)
print(len(queries), "queries sampled from three frequency strata")

# %%
# The stub retriever perturbs 40% of its slots. Two judges answer from the
# gold labels; a third is unsure about everything, so it vetoes all negatives.
gr = StubBackend(scenario.catalog, StubConfig(hallucination_rate=0.4, seed=4))
oracle = oracle_judge_script(scenario.eval_set, scenario.catalog)
judges = [ScriptedClient(oracle, "judge-a"), ScriptedClient(oracle, "judge-b")]
negatives, stats = mine_negatives(queries, gr, judges, k=5)
print("negatives with two agreeing judges:", len(negatives))

unsure = ScriptedClient(MockScript(default_reply="hard to say"), "judge-c")
vetoed, _ = mine_negatives(queries, gr, judges + [unsure], k=5)
print("negatives once an unsure judge joins:", len(vetoed))

# %%
# Negatives are balanced with an equal number of sampled positives, then
# each pair gets a reasoning record.
source = build_reasoning_source(scenario.positives, negatives, seed=4)
reasoner = ScriptedClient(MockScript(default_reply="The product type and term match the query."), "reasoner")
records = generate_reasoning_batch(reasoner, source, catalog=scenario.catalog, stats=stats)

# %%
# The augmented corpus is the original corpus followed by the reasoning
# records, written atomically as JSON Lines.
T = base_corpus(scenario.positives, scenario.catalog)
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "corpus.jsonl"
    emit_corpus(T, records, path, stats)
    corpus = load_corpus(path)
print(f"|T|={len(T)} |R|={len(records)} |T^|={len(corpus)}")
print(stats.to_dict()["records_emitted"])
