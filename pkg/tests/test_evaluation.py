import pytest

from grguard.agent import AgentConfig, FinalResult, Pipeline
from grguard.bm25 import Bm25Retriever
from grguard.catalog import build_catalog, make_document
from grguard.evaluation import (
    DEFAULT_SWEEP_KS,
    EvalReport,
    EvalSet,
    Relevance,
    UndefinedMetric,
    accuracy,
    format_table,
    load_eval_set,
    read_reports,
    run_ablation,
    topk_sweep,
    write_eval_set,
    write_reports,
)
from grguard.gateway import ScriptedClient
from grguard.generative import StubBackend, StubConfig
from grguard.synthetic import PERSPECTIVES, make_scenario, oracle_decision_script

R, I = Relevance.RELEVANT, Relevance.IRRELEVANT


@pytest.fixture
def cat():
    return build_catalog([make_document(t) for t in "abcde"], ("company",))


def test_all_relevant(cat):
    gold = EvalSet({"q": {"a": R, "b": R}})
    assert accuracy({"q": ["a", "b"]}, gold, cat)[0] == 1.0


def test_two_of_three(cat):
    gold = EvalSet({"q": {"a": R, "b": R, "c": I}})
    acc, counts = accuracy({"q": ["a", "b", "c"]}, gold, cat)
    assert acc == pytest.approx(0.666667, abs=1e-6)
    assert abs(acc - 2 / 3) <= 1e-9
    assert (counts.relevant, counts.labeled) == (2, 3)


def test_unjudged_excluded_and_hallucinations_irrelevant(cat):
    gold = EvalSet({"q": {"a": R}})
    acc, counts = accuracy({"q": ["a", "d", "ghost"]}, gold, cat)
    assert acc == 0.5
    assert counts.unjudged == 1 and counts.hallucinated == 1


def test_final_result_input(cat):
    gold = EvalSet({"q": {"a": R, "b": I}})
    res = FinalResult("q", [cat[0], cat[1]], ["ghost"])
    assert accuracy({"q": res}, gold, cat)[0] == pytest.approx(1 / 3)


def test_undefined_metric(cat):
    with pytest.raises(UndefinedMetric):
        accuracy({"q": ["a"]}, EvalSet({"q": {}}), cat)


def test_macro_vs_micro(cat):
    gold = EvalSet({"q1": {"a": R}, "q2": {"a": R, "b": I, "c": I}})
    results = {"q1": ["a"], "q2": ["a", "b", "c"]}
    assert accuracy(results, gold, cat)[0] == pytest.approx(2 / 4)
    assert accuracy(results, gold, cat, macro=True)[0] == pytest.approx((1 + 1 / 3) / 2)


def test_order_invariance(cat):
    gold = EvalSet({"q1": {"a": R, "b": I}, "q2": {"c": R}})
    a = accuracy({"q1": ["a", "b"], "q2": ["c"]}, gold, cat)
    b = accuracy({"q2": ["c"], "q1": ["b", "a"]}, gold, cat)
    assert a == b


def test_eval_set_io(tmp_path, cat):
    gold = EvalSet({"q": {"a": R, "b": I}})
    write_eval_set(gold, tmp_path / "e.jsonl")
    back = load_eval_set(tmp_path / "e.jsonl")
    assert back.entries == gold.entries
    back.validate(cat)
    with pytest.raises(ValueError):
        EvalSet({"q": {"zz": R}}).validate(cat)


def test_report_roundtrip(tmp_path):
    reports = [
        EvalReport("full", 0.8717, 600, 3, 0, {1: 0.855, 3: None}, notes=["x"]),
        EvalReport("w/o decision agent", 0.855, decision_agent_used=False),
    ]
    write_reports(reports, tmp_path / "r.json")
    assert read_reports(tmp_path / "r.json") == reports
    assert EvalReport.from_dict(reports[0].to_dict()) == reports[0]
    assert "87.17%" in format_table(reports)


@pytest.fixture(scope="module")
def scenario():
    return make_scenario(n_docs=80, n_queries=15, seed=3)


def make_factory(sc, rate=0.3):
    rm = Bm25Retriever(sc.catalog)
    decider = ScriptedClient(oracle_decision_script(sc.eval_set, sc.catalog))

    def factory(K, *, rate=rate, use_agent=True):
        return Pipeline(StubBackend(sc.catalog, StubConfig(rate, seed=11, k=5), rm), rm,
                        AgentConfig(PERSPECTIVES, top_k_cap=K), decider, gen_k=5, use_agent=use_agent)
    return factory


def test_default_ks():
    assert DEFAULT_SWEEP_KS == (1, 3, 5, 10, 20)


def test_sweep_points_and_missing(scenario):
    factory = make_factory(scenario)

    def flaky(K):
        if K == 3:
            raise RuntimeError("backend down")
        return factory(K)

    report = topk_sweep(flaky, [1, 3, 5], scenario.eval_set, scenario.catalog)
    assert report.curve[3] is None
    assert report.curve[1] == 1.0 and report.curve[5] == 1.0
    assert any("K=3" in n for n in report.notes)
    with pytest.raises(ValueError):
        topk_sweep(factory, [], scenario.eval_set, scenario.catalog)


def test_ablation_three_runs(scenario):
    factory = make_factory(scenario)

    def build(reasoning, agent):
        return factory(5, rate=0.3 if reasoning else 0.6, use_agent=agent)

    reports = run_ablation(build, scenario.eval_set, scenario.catalog)
    assert [r.system for r in reports] == ["full", "w/o reasoning", "w/o decision agent"]
    full, no_reason, no_agent = reports
    assert full.acc == 1.0 and no_reason.acc == 1.0
    assert no_agent.acc < 1.0
    assert not no_agent.decision_agent_used and not no_reason.reasoning_corpus_used
