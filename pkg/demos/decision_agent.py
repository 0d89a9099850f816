"""
Filtering generated results with the decision agent
===================================================

Two small catalogs reproduce typical retrieval mistakes: a fund that does
not exist in the catalog, and an annual aviation policy returned for a
one-day accident query. The agent expands each generated result with BM25
neighbours and keeps only candidates every perspective accepts.
"""

from grguard.agent import AgentConfig, Pipeline
from grguard.bm25 import Bm25Retriever
from grguard.catalog import build_catalog, make_document
from grguard.gateway import MockScript, Rule, ScriptedClient
from grguard.generative import RemoteBackend

# %%
# Insurance catalog. The duration attribute is what separates a one-day
# product from an annual one.
persp = ("company", "type", "duration")
rows = [
    ("平安短期综合意外险", {"company": "平安", "type": "意外险", "duration": "1-30天"}),
    ("运动意外无忧险", {"company": "众安", "type": "意外险", "duration": "1-7天"}),
    ("1000万全年航空意外险", {"company": "太平洋", "type": "航空意外险", "duration": "1年"}),
    ("平安终身寿险", {"company": "平安", "type": "寿险", "duration": "终身"}),
]
catalog = build_catalog([make_document(t, a, "insurance", persp) for t, a in rows], persp)

# %%
# The generative retriever is scripted to return three titles, one of which
# is wrong for the query. The decision model accepts all three on company and
# type, and rejects the annual policy on duration.
generated = "平安短期综合意外险; 运动意外无忧险; 1000万全年航空意外险"
gr = ScriptedClient(MockScript(default_reply=generated), "gr")
decider = ScriptedClient(
    MockScript(
        (
            Rule("regex", r"perspective of duration\.", "平安短期综合意外险\n运动意外无忧险"),
            Rule("substring", "perspective of", generated.replace("; ", "\n")),
        ),
    ),
    "decider",
)

pipe = Pipeline(RemoteBackend(gr, catalog), Bm25Retriever(catalog), AgentConfig(persp, m=2, top_k_cap=5), decider)
result = pipe.run("单日意外保险")
print("generated:", generated)
print("final:    ", result.titles)

# %%
# The trace shows every candidate, what each perspective kept, and why the
# rest were dropped.
print(result.trace.to_json())

# %%
# Bypassing the agent returns the generated list unchanged.
bypass = Pipeline(RemoteBackend(gr, catalog), Bm25Retriever(catalog), AgentConfig(persp), None, use_agent=False)
print("bypass:   ", bypass.run("单日意外保险").titles)
