import random

import pytest

from oracles import all_assignments, brute_intersection
from grguard.agent import (
    AgentConfig,
    MissingFieldPolicy,
    Pipeline,
    assemble_candidates,
    expand,
    filter_by_perspectives,
)
from grguard.bm25 import Bm25Retriever
from grguard.catalog import build_catalog, make_document
from grguard.gateway import MockScript, ScriptedClient, TransportError
from grguard.generative import GenerationResult


class PerspectiveClient:
    """Decision model replying with a fixed title set per perspective."""

    name = "decider"

    def __init__(self, replies, fail=()):
        self.replies, self.fail, self.calls = replies, set(fail), []

    def complete(self, prompt):
        persp = prompt.split("from the perspective of ")[1].split(".")[0]
        self.calls.append(persp)
        if persp in self.fail:
            raise TransportError("down")
        return "\n".join(self.replies.get(persp, ())) or "NONE"


def docs(n, attrs=None):
    return [make_document(f"C{i}", attrs or {"p0": "v", "p1": "v", "p2": "v", "p3": "v"}) for i in range(n)]


def test_exhaustive_small_assignments():
    cases = 0
    for nc in range(1, 6):
        for npersp in range(1, 5):
            if nc * npersp > 12:
                continue
            cands = docs(nc)
            persps = tuple(f"p{j}" for j in range(npersp))
            cfg = AgentConfig(persps)
            for bits in all_assignments(nc, npersp):
                retained = {
                    p: {f"C{i}" for i in range(nc) if bits[j * nc + i]} for j, p in enumerate(persps)
                }
                final, trace = filter_by_perspectives("q", cands, cfg, PerspectiveClient(retained))
                expect = brute_intersection([c.title for c in cands], retained)
                assert [d.title for d in final] == expect
                assert set(trace.final) <= set(trace.candidates)
                for d in cands:
                    if d.doc_id not in trace.final:
                        assert trace.drop_reasons[d.doc_id]
                cases += 1
    assert cases > 10_000


def test_adding_perspective_never_grows_final():
    rng = random.Random(0)
    cands = docs(5)
    for _ in range(200):
        retained = {f"p{j}": {f"C{i}" for i in range(5) if rng.random() < 0.6} for j in range(4)}
        client = PerspectiveClient(retained)
        prev = None
        for n in range(1, 5):
            final, _ = filter_by_perspectives("q", cands, AgentConfig(tuple(f"p{j}" for j in range(n))), client)
            ids = {d.doc_id for d in final}
            if prev is not None:
                assert ids <= prev
            prev = ids


def test_ground_truth_oracle_decider():
    cands = docs(5)
    gold = {"C1", "C3", "C9"}
    client = PerspectiveClient({f"p{j}": gold for j in range(4)})
    final, _ = filter_by_perspectives("q", cands, AgentConfig(("p0", "p1", "p2", "p3")), client)
    assert {d.title for d in final} == gold & {d.title for d in cands}


def test_empty_candidates():
    final, trace = filter_by_perspectives("q", [], AgentConfig(("p0",)), PerspectiveClient({}))
    assert final == [] and trace.final == []


def test_degraded_perspective_retains_nothing():
    cands = docs(3)
    client = PerspectiveClient({"p0": {"C0", "C1", "C2"}}, fail={"p1"})
    final, trace = filter_by_perspectives("q", cands, AgentConfig(("p0", "p1")), client)
    assert final == []
    assert trace.degraded == ["p1"]
    assert trace.drop_reasons["C0"] == ["p1: degraded"]


@pytest.mark.parametrize(
    "policy, kept",
    [(MissingFieldPolicy.PASS_THROUGH, {"C0", "U"}), (MissingFieldPolicy.EXCLUDE, {"C0"})],
)
def test_missing_field_policy(policy, kept):
    cands = [make_document("C0", {"p0": "v"}), make_document("C1", {"p0": "v"}), make_document("U", {})]
    client = PerspectiveClient({"p0": {"C0"}})
    final, trace = filter_by_perspectives("q", cands, AgentConfig(("p0",), missing_field_policy=policy), client)
    assert {d.title for d in final} == kept
    # the unknown-valued candidate is never shown to the model
    assert "U" not in str(client.calls)


def test_all_unknown_skips_model_call():
    client = PerspectiveClient({})
    cands = [make_document("U", {})]
    final, _ = filter_by_perspectives("q", cands, AgentConfig(("p0",)), client)
    assert [d.title for d in final] == ["U"] and client.calls == []


def test_parallel_perspectives_match_serial():
    rng = random.Random(1)
    cands = docs(5)
    for _ in range(30):
        retained = {f"p{j}": {f"C{i}" for i in range(5) if rng.random() < 0.7} for j in range(4)}
        cfg = AgentConfig(("p0", "p1", "p2", "p3"))
        a, _ = filter_by_perspectives("q", cands, cfg, PerspectiveClient(retained))
        b, _ = filter_by_perspectives("q", cands, cfg, PerspectiveClient(retained), workers=4)
        assert a == b


# -- expansion ---------------------------------------------------------------------

@pytest.fixture
def small():
    titles = ["alpha beta", "alpha gamma", "beta gamma", "delta"]
    cat = build_catalog([make_document(t, {"p0": "v"}) for t in titles], ("p0",))
    return cat, Bm25Retriever(cat)


def test_expand_m0(small):
    cat, rm = small
    assert expand(cat[0], rm, 0) == [cat[0]]
    assert expand(cat[0], rm, 0, include_seed=False) == []


def test_expand_self_excluded(small):
    cat, rm = small
    out = expand(cat[0], rm, 3)
    assert out[0] is cat[0]
    assert [d.doc_id for d in out].count(cat[0].doc_id) == 1
    assert len(out) == 3  # "delta" shares no term with the seed


def test_expand_bounds(small):
    cat, rm = small
    sub = build_catalog(list(cat)[:3], ("p0",))
    assert len(expand(sub[0], Bm25Retriever(sub), 2)) <= 3


def gen_of(cat, titles):
    return GenerationResult.from_raw("q", titles, cat)


def test_assemble_overlap_and_cap(small):
    cat, rm = small
    g = gen_of(cat, ["alpha beta", "alpha gamma"])
    c = assemble_candidates(g, rm, AgentConfig(("p0",), m=3, top_k_cap=5))
    assert [d.title for d in c] == ["alpha beta", "alpha gamma", "beta gamma"]
    c1 = assemble_candidates(g, rm, AgentConfig(("p0",), m=3, top_k_cap=1))
    assert [d.title for d in c1] == ["alpha beta"]


def test_assemble_cap_takes_first_in_order():
    cat = build_catalog([make_document(f"t{i} x{i}") for i in range(10)], ("p0",))
    rm = Bm25Retriever(cat)
    g = gen_of(cat, [d.title for d in cat])
    c = assemble_candidates(g, rm, AgentConfig(("p0",), m=0, top_k_cap=5))
    assert [d.title for d in c] == [f"t{i} x{i}" for i in range(5)]


def test_assemble_empty(small):
    cat, rm = small
    assert assemble_candidates(gen_of(cat, ["nope"]), rm, AgentConfig(("p0",))) == []


def test_config_invariants():
    with pytest.raises(ValueError):
        AgentConfig(())
    with pytest.raises(ValueError):
        AgentConfig(("p",), m=-1)
    with pytest.raises(ValueError):
        AgentConfig(("p",), top_k_cap=0)


# -- pipeline --------------------------------------------------------------------

class Fixed:
    def __init__(self, cat, titles):
        self.cat, self.titles = cat, titles

    def generate(self, q, k):
        return GenerationResult.from_raw(q, self.titles[:k], self.cat)


def test_pipeline_bypass_equals_resolved_prefix(small):
    cat, rm = small
    pipe = Pipeline(Fixed(cat, ["ghost", "alpha beta", "delta", "beta gamma"]), rm,
                    AgentConfig(("p0",), top_k_cap=2), None, gen_k=4, use_agent=False)
    r = pipe.run("q")
    assert [d.title for d in r.documents] == ["alpha beta", "delta"]
    assert r.hallucinated == ["ghost"]


def test_pipeline_needs_decider(small):
    cat, rm = small
    with pytest.raises(ValueError):
        Pipeline(Fixed(cat, []), rm, AgentConfig(("p0",)), None)


def test_pipeline_empty_generation(small):
    cat, rm = small
    pipe = Pipeline(Fixed(cat, []), rm, AgentConfig(("p0",)), ScriptedClient(MockScript(default_reply="x")))
    assert pipe.run("q").documents == []


def test_run_many_order_independent(small):
    cat, rm = small
    client = ScriptedClient(MockScript(default_reply="alpha beta\nalpha gamma"))
    pipe = Pipeline(Fixed(cat, ["alpha beta"]), rm, AgentConfig(("p0",)), client)
    a = pipe.run_many(["z", "a", "m"])
    b = pipe.run_many(["m", "z", "a"], workers=3)
    assert list(a) == list(b) == ["a", "m", "z"]
    assert {q: r.titles for q, r in a.items()} == {q: r.titles for q, r in b.items()}
