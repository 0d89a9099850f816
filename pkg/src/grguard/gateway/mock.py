"""Scripted stand-ins for model endpoints.

A script is an ordered list of rules matched against the content of the last
chat message; the first matching rule's reply wins, otherwise the default
reply is returned. The same script drives both the in-process
:class:`ScriptedClient` and the HTTP :class:`MockServer`.
"""

from __future__ import annotations

import errno
import json
import re
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterable

from .client import EmptyResponse


class ScriptError(ValueError):
    def __init__(self, rule_index: int | None, reason: str):
        self.rule_index = rule_index
        where = f"rule {rule_index}: " if rule_index is not None else ""
        super().__init__(f"{where}{reason}")


class PortInUse(OSError):
    pass


@dataclass(frozen=True)
class Rule:
    match_type: str
    pattern: str
    reply: str

    def matches(self, content: str) -> bool:
        if self.match_type == "substring":
            return self.pattern in content
        return re.search(self.pattern, content) is not None


@dataclass(frozen=True)
class MockScript:
    rules: tuple[Rule, ...] = ()
    default_reply: str = ""

    def reply_for(self, content: str) -> str:
        for rule in self.rules:
            if rule.matches(content):
                return rule.reply
        return self.default_reply

    def to_dict(self) -> dict:
        return {
            "rules": [
                {"match_type": r.match_type, "pattern": r.pattern, "reply": r.reply}
                for r in self.rules
            ],
            "default_reply": self.default_reply,
        }

    @classmethod
    def from_dict(cls, obj: object) -> "MockScript":
        if isinstance(obj, list):
            obj = {"rules": obj}
        if not isinstance(obj, dict):
            raise ScriptError(None, "script must be an object or a list of rules")
        rules = []
        for i, raw in enumerate(obj.get("rules", [])):
            if not isinstance(raw, dict):
                raise ScriptError(i, "rule must be an object")
            # "contains" is accepted as shorthand for a substring rule
            if "contains" in raw and "pattern" not in raw:
                raw = {"match_type": "substring", "pattern": raw["contains"], **raw}
            mtype = raw.get("match_type")
            if mtype not in ("substring", "regex"):
                raise ScriptError(i, f"match_type must be 'substring' or 'regex', got {mtype!r}")
            pattern, reply = raw.get("pattern"), raw.get("reply")
            if not isinstance(pattern, str) or not isinstance(reply, str):
                raise ScriptError(i, "'pattern' and 'reply' must be strings")
            if mtype == "regex":
                try:
                    re.compile(pattern)
                except re.error as exc:
                    raise ScriptError(i, f"bad regex: {exc}") from None
            rules.append(Rule(mtype, pattern, reply))
        default = obj.get("default_reply", "")
        if not isinstance(default, str):
            raise ScriptError(None, "'default_reply' must be a string")
        return cls(tuple(rules), default)


def load_script(path: str | Path) -> MockScript:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScriptError(None, f"{path}: invalid JSON ({exc.msg})") from None
    return MockScript.from_dict(obj)


def write_script(script: MockScript, path: str | Path) -> None:
    Path(path).write_text(json.dumps(script.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8")


class ScriptedClient:
    """In-process client answering from a script; no sockets involved."""

    def __init__(self, script: MockScript, name: str = "scripted"):
        self.script = script
        self.name = name
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.prompts.append(prompt)
        reply = self.script.reply_for(prompt)
        if not reply.strip():
            raise EmptyResponse(f"{self.name}: empty completion")
        return reply

    def close(self) -> None:
        pass


def _completion_payload(model: str, content: str) -> dict:
    return {
        "id": "mock-completion",
        "object": "chat.completion",
        "model": model,
        "choices": [
            {"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}
        ],
    }


class _Handler(BaseHTTPRequestHandler):
    server: "_Server"

    def log_message(self, format, *args):  # noqa: A002 - silence stderr access log
        pass

    def _send(self, status: int, payload: object) -> None:
        data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _respond(self, owner: "MockServer") -> tuple[int, dict]:
        if self.path.rstrip("/") != "/v1/chat/completions":
            return 404, {"error": {"message": f"no route {self.path}"}}
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
            messages = body["messages"]
            content = messages[-1]["content"] if messages else ""
        except (ValueError, KeyError, TypeError, IndexError):
            return 400, {"error": {"message": "malformed request"}}
        owner._record(body)
        fault = owner._next_fault()
        if owner.delay:
            time.sleep(owner.delay)
        if fault is not None:
            return fault, {"error": {"message": f"injected HTTP {fault}"}}
        reply = owner.script.reply_for(content if isinstance(content, str) else "")
        return 200, _completion_payload(str(body.get("model", "")), reply)

    def do_POST(self):
        owner = self.server.owner
        owner._enter()
        try:
            status, payload = self._respond(owner)
        finally:
            # leave the in-flight count before replying: once the client has
            # the response it may legitimately start its next request
            owner._exit()
        self._send(status, payload)


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = False
    owner: "MockServer"

    def handle_error(self, request, client_address):
        # clients that time out close the socket mid-response; nothing to report
        pass


@dataclass
class MockServer:
    """Handle on a running scripted chat-completions server.

    ``faults`` is a queue of HTTP status codes returned, in order, to the
    first requests (for retry tests); ``delay`` holds every response for that
    many seconds. The reply itself never depends on request history.
    """

    script: MockScript
    port: int = 0
    host: str = "127.0.0.1"
    delay: float = 0.0
    faults: list[int] = field(default_factory=list)
    requests: list[dict] = field(default_factory=list, init=False)
    in_flight: int = field(default=0, init=False)
    max_in_flight: int = field(default=0, init=False)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._httpd: _Server | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "MockServer":
        try:
            httpd = _Server((self.host, self.port), _Handler)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(exc.errno, f"port {self.port} already in use") from None
            raise
        httpd.owner = self
        self._httpd = httpd
        self.port = httpd.server_address[1]
        self._thread = threading.Thread(
            target=httpd.serve_forever, kwargs={"poll_interval": 0.05}, name="mock-llm", daemon=True
        )
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        if self._thread is not None:
            self._thread.join()

    def close(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    def __enter__(self):
        return self if self._httpd else self.start()

    def __exit__(self, *exc):
        self.close()

    def _enter(self) -> None:
        with self._lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)

    def _exit(self) -> None:
        with self._lock:
            self.in_flight -= 1

    def _record(self, body: dict) -> None:
        with self._lock:
            self.requests.append(body)

    def _next_fault(self) -> int | None:
        with self._lock:
            return self.faults.pop(0) if self.faults else None


def serve_mock(port: int, script: MockScript | str | Path, *, host: str = "127.0.0.1",
               delay: float = 0.0, faults: Iterable[int] = ()) -> MockServer:
    if not isinstance(script, MockScript):
        script = load_script(script)
    return MockServer(script, port=port, host=host, delay=delay, faults=list(faults)).start()
