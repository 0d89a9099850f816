"""
Sparse retrieval over a product catalog
=======================================

Build a BM25 index over product titles, run a few queries, and look at how
Chinese text is tokenized.
"""

from grguard.bm25 import Bm25Params, Bm25Retriever, FieldSpec, build_index, dump_index, retrieve, tokenize
from grguard.catalog import build_catalog, make_document

# %%
# A catalog is a list of documents keyed by their normalized title. Attributes
# not given for a perspective default to "unknown".
perspectives = ("company", "type", "risk")
catalog = build_catalog(
    [
        make_document("中银创新医疗混合C", {"company": "中银基金", "type": "混合型", "risk": "中高"}, "fund", perspectives),
        make_document("中银创新医疗混合A", {"company": "中银基金", "type": "混合型", "risk": "中高"}, "fund", perspectives),
        make_document("华安医疗创新混合C", {"company": "华安基金", "type": "混合型"}, "fund", perspectives),
        make_document("易方达消费行业股票", {"company": "易方达", "type": "股票型", "risk": "高"}, "fund", perspectives),
        make_document("招商中证白酒指数A", {"company": "招商基金", "type": "指数型", "risk": "高"}, "fund", perspectives),
    ],
    perspectives,
)
print(catalog.get("华安医疗创新混合C").attributes)

# %%
# CJK runs become overlapping character bigrams; other text is lowercased
# and split into word runs.
print(tokenize("医疗创新 Fund-A"))

# %%
# Retrieval returns (document index, score) pairs, best first, ties broken
# by DocID.
index = build_index(catalog)
for i, score in retrieve(index, Bm25Params(), "医疗混合", 3):
    print(f"{score:7.4f}  {catalog[i].title}")

# %%
# The retriever wrapper maps straight to documents. Including the attributes
# in the indexed text lets a company name match too.
rm = Bm25Retriever(catalog, field_spec=FieldSpec.TITLE_AND_ATTRIBUTES)
print([d.title for d in rm("中银基金", 2)])

# %%
# The index can be written as JSON Lines for inspection.
import tempfile
from pathlib import Path

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "index.jsonl"
    dump_index(index, path)
    print(path.read_text(encoding="utf-8").splitlines()[0])
