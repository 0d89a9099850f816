import json
import sys
from pathlib import Path

import pytest

from grguard.catalog import build_catalog, make_document
from grguard.gateway import MockScript, Rule, serve_mock

sys.path.insert(0, str(Path(__file__).parent))

FUND_PERSPECTIVES = ("company", "type", "risk")
INSURANCE_PERSPECTIVES = ("company", "type", "duration")

CASE1_QUERY = "抗流感基金"
CASE1_BASELINE = "国泰基金封闭; 中银创新医疗混合C; 中银创新医疗混合A"
CASE1_OURS = {"中银创新医疗混合C", "中银创新医疗混合A", "华安医疗创新混合C"}

CASE2_QUERY = "单日意外保险"
CASE2_BASELINE = "平安短期综合意外险; 运动意外无忧险; 1000万全年航空意外险"
CASE2_OURS = {"平安短期综合意外险", "运动意外无忧险"}


def fund_documents():
    rows = [
        ("中银创新医疗混合C", {"company": "中银基金", "type": "混合型", "risk": "中高"}),
        ("中银创新医疗混合A", {"company": "中银基金", "type": "混合型", "risk": "中高"}),
        ("华安医疗创新混合C", {"company": "华安基金", "type": "混合型", "risk": "中高"}),
        ("易方达消费行业股票", {"company": "易方达", "type": "股票型", "risk": "高"}),
        ("广发纳斯达克100ETF联接A", {"company": "广发基金", "type": "指数型", "risk": "高"}),
        ("招商中证白酒指数A", {"company": "招商基金", "type": "指数型", "risk": "高"}),
    ]
    return [make_document(t, a, "fund", FUND_PERSPECTIVES) for t, a in rows]


def insurance_documents():
    rows = [
        ("平安短期综合意外险", {"company": "平安", "type": "意外险", "duration": "1-30天"}),
        ("运动意外无忧险", {"company": "众安", "type": "意外险", "duration": "1-7天"}),
        ("1000万全年航空意外险", {"company": "太平洋", "type": "航空意外险", "duration": "1年"}),
        ("平安终身寿险", {"company": "平安", "type": "寿险", "duration": "终身"}),
        ("众安百万医疗险", {"company": "众安", "type": "医疗险", "duration": "1年"}),
    ]
    return [make_document(t, a, "insurance", INSURANCE_PERSPECTIVES) for t, a in rows]


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def catalog_rows(docs):
    return [d.to_dict() for d in docs]


def case1_decision_script():
    keep = "\n".join(sorted(CASE1_OURS))
    return MockScript((Rule("substring", f"search query: {CASE1_QUERY},", keep),), default_reply="NONE")


def case2_decision_script():
    gr_titles = "\n".join(t.strip() for t in CASE2_BASELINE.split(";"))
    return MockScript(
        (
            Rule("regex", rf"search query: {CASE2_QUERY},.*perspective of duration\.",
                 "平安短期综合意外险\n运动意外无忧险"),
            Rule("substring", f"search query: {CASE2_QUERY},", gr_titles),
        ),
        default_reply="NONE",
    )


@pytest.fixture
def fund_catalog():
    return build_catalog(fund_documents(), FUND_PERSPECTIVES)


@pytest.fixture
def insurance_catalog():
    return build_catalog(insurance_documents(), INSURANCE_PERSPECTIVES)


@pytest.fixture
def mock_server():
    """Factory for scripted servers on ephemeral ports; all closed at teardown."""
    servers = []

    def start(script=MockScript(default_reply="OK"), **kw):
        srv = serve_mock(0, script, **kw)
        servers.append(srv)
        return srv

    yield start
    for srv in servers:
        srv.close()
