"""Uniform access to judge, reasoning and decision models."""

from .client import (
    ChatClient,
    EmptyResponse,
    GatewayError,
    ModelEndpoint,
    ProtocolError,
    Timeout,
    TransportError,
)
from .mock import MockScript, MockServer, PortInUse, Rule, ScriptedClient, ScriptError, load_script, serve_mock
from .prompts import MissingPlaceholder, PromptId, PromptTemplate, default_templates, load_template, render_prompt
from .roles import (
    Decision,
    JudgeVerdict,
    Label,
    decide,
    generate_reasoning,
    judge_relevance,
    parse_title_list,
    parse_verdict,
    reasoning_prompt,
)

__all__ = [
    "ChatClient", "Decision", "EmptyResponse", "GatewayError", "JudgeVerdict", "Label",
    "MissingPlaceholder", "MockScript", "MockServer", "ModelEndpoint", "PortInUse", "PromptId",
    "PromptTemplate", "ProtocolError", "Rule", "ScriptError", "ScriptedClient", "Timeout",
    "TransportError", "decide", "default_templates", "generate_reasoning", "judge_relevance",
    "load_script", "load_template", "parse_title_list", "parse_verdict", "reasoning_prompt",
    "render_prompt", "serve_mock",
]
