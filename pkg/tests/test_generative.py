import math

import pytest

from conftest import CASE1_BASELINE, CASE1_QUERY
from grguard.bm25 import Bm25Retriever
from grguard.gateway import ChatClient, MockScript, ModelEndpoint, ScriptedClient
from grguard.generative import (
    NEAR_MISS,
    OFF_TOPIC,
    GenerationResult,
    RemoteBackend,
    StubBackend,
    StubConfig,
    parse_generation,
)
from grguard.synthetic import make_catalog, make_queries


@pytest.mark.parametrize(
    "text, out",
    [
        ("A; B；C\nD", ["A", "B", "C", "D"]),
        ("A; A; B", ["A", "B"]),
        ("", []),
        (" ;\n ；", []),
        ("  X  \n\nY", ["X", "Y"]),
    ],
)
def test_parse_generation(text, out):
    assert parse_generation(text) == out


def test_from_raw_accounting(fund_catalog):
    raw = ["国泰基金封闭", "中银创新医疗混合C", " 中银创新医疗混合C", "中银创新医疗混合A"]
    g = GenerationResult.from_raw("q", raw, fund_catalog)
    assert g.duplicates == 1
    assert [d.title for d in g.resolved] == ["中银创新医疗混合C", "中银创新医疗混合A"]
    assert g.invalid == ["国泰基金封闭"]
    assert len(g.resolved) + len(g.invalid) + g.duplicates == len(raw)
    assert g.invalid_within(2) == ["国泰基金封闭"]
    assert not {d.doc_id for d in g.resolved} & set(g.invalid)


def test_remote_case1(fund_catalog, mock_server):
    srv = mock_server(MockScript(default_reply=CASE1_BASELINE))
    ep = ModelEndpoint("gr", srv.url, "gr-14b")
    with ChatClient(ep) as client:
        g = RemoteBackend(client, fund_catalog).generate(CASE1_QUERY, 3)
    assert [d.title for d in g.resolved] == ["中银创新医疗混合C", "中银创新医疗混合A"]
    assert g.invalid == ["国泰基金封闭"]
    assert "Search query: 抗流感基金" in srv.requests[0]["messages"][0]["content"]


def test_remote_truncates_to_k(fund_catalog):
    client = ScriptedClient(MockScript(default_reply=CASE1_BASELINE))
    g = RemoteBackend(client, fund_catalog).generate(CASE1_QUERY, 2)
    assert g.raw_outputs == ["国泰基金封闭", "中银创新医疗混合C"]


@pytest.fixture(scope="module")
def synth():
    cat = make_catalog(200, seed=1)
    return cat, Bm25Retriever(cat), make_queries(50, seed=1)


def test_stub_rate_zero_is_bm25(synth):
    cat, rm, queries = synth
    stub = StubBackend(cat, StubConfig(0.0, seed=4, k=5), rm)
    for q in queries:
        g = stub.generate(q)
        assert [d.doc_id for d in g.resolved] == [d.doc_id for d in rm(q, 5)]
        assert g.invalid == []


def test_stub_rate_one_perturbs_every_slot(synth):
    cat, rm, queries = synth
    stub = StubBackend(cat, StubConfig(1.0, seed=4, k=5), rm)
    kinds = set()
    for q in queries:
        top = [d.title for d in rm(q, 5)]
        g = stub.generate(q)
        assert len(g.raw_outputs) == len(top)
        for slot, raw in enumerate(g.raw_outputs):
            assert raw != top[slot]
        kinds |= {s.perturbation for s in g.slots}
        far = {d.doc_id for d in rm(q, 15)}
        for s in g.slots:
            if s.perturbation == OFF_TOPIC:
                assert s.emitted in cat and s.emitted not in far
            else:
                assert s.emitted not in cat
    assert kinds == {NEAR_MISS, OFF_TOPIC}


def test_stub_deterministic(synth):
    cat, rm, queries = synth
    a = StubBackend(cat, StubConfig(0.4, seed=9), rm)
    b = StubBackend(cat, StubConfig(0.4, seed=9), Bm25Retriever(cat))
    for q in queries:
        assert a.generate(q) == b.generate(q)
    c = StubBackend(cat, StubConfig(0.4, seed=10), rm)
    assert any(a.generate(q).raw_outputs != c.generate(q).raw_outputs for q in queries)


def test_stub_never_duplicates(synth):
    cat, rm, queries = synth
    stub = StubBackend(cat, StubConfig(0.9, seed=2), rm)
    for q in queries:
        g = stub.generate(q)
        assert g.duplicates == 0
        assert len(g.resolved) + len(g.invalid) == len(g.slots)


def test_stub_rate_converges(synth):
    cat, rm, queries = synth
    n = hits = 0
    for seed in range(45):
        stub = StubBackend(cat, StubConfig(0.3, seed=seed), rm)
        for q in queries:
            slots = stub.generate(q).slots
            n += len(slots)
            hits += sum(s.perturbed for s in slots)
    assert n >= 10_000
    sigma = math.sqrt(0.3 * 0.7 / n)
    assert abs(hits / n - 0.3) <= 3 * sigma


def test_stub_config_validation():
    with pytest.raises(ValueError):
        StubConfig(hallucination_rate=1.5)
    with pytest.raises(ValueError):
        StubConfig(k=0)
