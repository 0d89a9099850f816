"""The three model roles: relevance judge, reasoning generator, decision model.

Each function takes any object with a ``name`` attribute and a
``complete(prompt) -> str`` method (a :class:`ChatClient` or a
:class:`ScriptedClient`).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Sequence

from ..catalog import Document, normalize_docid
from .client import EmptyResponse, GatewayError
from .prompts import PromptId, PromptTemplate, load_template

logger = logging.getLogger(__name__)


class Completer(Protocol):
    name: str

    def complete(self, prompt: str) -> str: ...


class JudgeVerdict(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"
    UNPARSEABLE = "unparseable"


class Label(str, Enum):
    POSITIVE = "+"
    NEGATIVE = "-"

    @property
    def word(self) -> str:
        return "relevant" if self is Label.POSITIVE else "irrelevant"


# Earliest match wins; negative forms are tried first at any given position.
_VERDICT_RE = re.compile(
    r"(?P<neg>\bnot\s+relevant\b|\birrelevant\b|不相关|无关)|(?P<pos>\brelevant\b|相关)",
    re.IGNORECASE,
)


def parse_verdict(reply: str) -> JudgeVerdict:
    m = _VERDICT_RE.search(reply)
    if m is None:
        return JudgeVerdict.UNPARSEABLE
    return JudgeVerdict.IRRELEVANT if m.group("neg") else JudgeVerdict.RELEVANT


def _title(d: Document | str) -> str:
    return d.title if isinstance(d, Document) else d


def judge_relevance(
    client: Completer,
    q: str,
    d: Document | str,
    task_instruction: str = "",
    template: PromptTemplate | None = None,
) -> JudgeVerdict:
    template = template or load_template(PromptId.RELEVANCE_JUDGEMENT)
    prompt = template.render(q=q, d_i=_title(d), task_instruction=task_instruction)
    try:
        reply = client.complete(prompt)
    except GatewayError as exc:
        logger.warning("judge %s failed on (%r, %r): %s", client.name, q, _title(d), exc)
        return JudgeVerdict.UNPARSEABLE
    return parse_verdict(reply)


def reasoning_prompt(q: str, d: Document | str, label: Label, template: PromptTemplate | None = None) -> str:
    template = template or load_template(PromptId.REASONING_GENERATION)
    return template.render(q=q, d_i=_title(d), label=Label(label).word)


def generate_reasoning(
    client: Completer,
    q: str,
    d: Document | str,
    label: Label,
    template: PromptTemplate | None = None,
) -> str:
    text = client.complete(reasoning_prompt(q, d, label, template)).strip()
    if not text:
        raise EmptyResponse(f"{client.name}: blank reasoning")
    return text


@dataclass(frozen=True)
class Decision:
    retained: frozenset[str]
    hallucinated: tuple[str, ...] = ()
    unparseable: bool = False


def serialize_candidates(candidates: Sequence[tuple[str, str]], perspective_name: str) -> str:
    entries = [f"<title: {t}, {perspective_name}: {v}>" for t, v in candidates]
    return "{" + ", ".join(entries) + "}"


_SPLIT_RE = re.compile(r"[\n;；]")
_BULLET_RE = re.compile(r"^\s*(?:[-*•·]|\d+\s*[.)、:])\s*")
_TITLE_FIELD_RE = re.compile(r"^<?\s*title\s*[:：]\s*(.*?)(?:\s*,\s*[\w ]+\s*[:：].*?)?>?$", re.IGNORECASE)
_NONE_WORDS = {"none", "无", "没有", "n/a"}


def parse_title_list(reply: str) -> list[str] | None:
    """Split a decision reply into normalized titles.

    Returns None when the reply carries no content at all, and an empty list
    for an explicit "NONE".
    """
    pieces = []
    for raw in _SPLIT_RE.split(reply):
        piece = _BULLET_RE.sub("", raw).strip()
        m = _TITLE_FIELD_RE.match(piece)
        if m:
            piece = m.group(1)
        piece = normalize_docid(piece.strip("\"'`《》「」<>{}"))
        if piece:
            pieces.append(piece)
    if not pieces:
        return None
    if all(p.lower().rstrip(".") in _NONE_WORDS for p in pieces):
        return []
    return pieces


def decide(
    client: Completer,
    q: str,
    candidates: Sequence[tuple[str, str]],
    perspective_name: str,
    template: PromptTemplate | None = None,
) -> Decision:
    """Ask the decision model which candidate titles pass one perspective.

    Titles in the reply that are not among the candidates are dropped and
    reported as hallucinated. A blank or contentless reply retains nothing.
    """
    if not candidates:
        raise ValueError("decide() needs at least one candidate")
    template = template or load_template(PromptId.DECISION)
    prompt = template.render(
        q=q,
        documents=serialize_candidates(candidates, perspective_name),
        persp_name=perspective_name,
    )
    try:
        reply = client.complete(prompt)
    except EmptyResponse:
        return Decision(frozenset(), unparseable=True)
    titles = parse_title_list(reply)
    if titles is None:
        return Decision(frozenset(), unparseable=True)
    by_norm = {normalize_docid(t): t for t, _ in candidates}
    retained = {by_norm[t] for t in titles if t in by_norm}
    hallucinated = tuple(t for t in titles if t not in by_norm)
    if hallucinated:
        logger.info("decision model %s named %d unknown titles", client.name, len(hallucinated))
    return Decision(frozenset(retained), hallucinated)
