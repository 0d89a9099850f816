"""
Talking to scripted model endpoints
===================================

Every model role goes through an OpenAI-compatible chat-completions client.
Here a local mock server answers from a script, so nothing leaves the machine.
"""

from grguard.catalog import make_document
from grguard.gateway import (
    ChatClient,
    MockScript,
    ModelEndpoint,
    Rule,
    decide,
    judge_relevance,
    serve_mock,
)
from grguard.gateway.prompts import PromptId, load_template

# %%
# Prompts are plain-text templates with ``{{name}}`` placeholders.
template = load_template(PromptId.RELEVANCE_JUDGEMENT)
print(template.placeholders)
print(template.render(q="单日意外保险", d_i="运动意外无忧险", task_instruction=""))

# %%
# A script is an ordered rule list. The first rule whose pattern matches the
# prompt decides the reply; otherwise the default reply is used.
script = MockScript(
    (
        Rule("substring", "1000万全年航空意外险 is relevant", "IRRELEVANT: annual aviation cover"),
        Rule("regex", r"perspective of duration\.", "平安短期综合意外险\n运动意外无忧险"),
        Rule("substring", "is relevant to the query", "RELEVANT"),
    ),
    default_reply="NONE",
)

server = serve_mock(0, script)
client = ChatClient(ModelEndpoint("judge", server.url, "mock-model", max_retries=1))

# %%
# Judge replies are reduced to Relevant, Irrelevant or Unparseable.
for title in ("运动意外无忧险", "1000万全年航空意外险"):
    print(title, judge_relevance(client, "单日意外保险", title).value)

# %%
# A decision call sees candidates with one attribute and keeps the titles
# the model names. Titles that were never offered are reported separately.
docs = [
    make_document("平安短期综合意外险", {"duration": "1-30天"}),
    make_document("运动意外无忧险", {"duration": "1-7天"}),
    make_document("1000万全年航空意外险", {"duration": "1年"}),
]
decision = decide(client, "单日意外保险", [(d.title, d.attribute("duration")) for d in docs], "duration")
print(sorted(decision.retained))

client.close()
server.close()
print("requests served:", len(server.requests))
