"""Prompt templates with ``{{name}}`` placeholders."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping

_PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")


class MissingPlaceholder(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"no binding for placeholder {self.name!r}"


class PromptId(str, Enum):
    RELEVANCE_JUDGEMENT = "relevance_judgement"
    REASONING_GENERATION = "reasoning_generation"
    DECISION = "decision"
    GENERATION = "generation"


@dataclass(frozen=True)
class PromptTemplate:
    id: PromptId
    text: str

    @property
    def placeholders(self) -> list[str]:
        seen: dict[str, None] = {}
        for m in _PLACEHOLDER.finditer(self.text):
            seen.setdefault(m.group(1))
        return list(seen)

    def render(self, **bindings: str) -> str:
        return render_prompt(self, bindings)


def render_prompt(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    for name in template.placeholders:
        if name not in bindings:
            raise MissingPlaceholder(name)
    # single pass: bound values are never re-scanned for placeholders
    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template.text)


def load_template(prompt_id: PromptId | str, override_dir: str | Path | None = None) -> PromptTemplate:
    """Load a template, preferring ``<override_dir>/<id>.txt`` over the shipped default."""
    prompt_id = PromptId(prompt_id)
    name = f"{prompt_id.value}.txt"
    if override_dir is not None:
        path = Path(override_dir) / name
        if path.exists():
            return PromptTemplate(prompt_id, path.read_text(encoding="utf-8").rstrip("\n"))
    text = resources.files("grguard.gateway").joinpath("templates", name).read_text(encoding="utf-8")
    return PromptTemplate(prompt_id, text.rstrip("\n"))


def default_templates(override_dir: str | Path | None = None) -> dict[PromptId, PromptTemplate]:
    return {pid: load_template(pid, override_dir) for pid in PromptId}
