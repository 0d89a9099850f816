"""Chat-completions client for OpenAI-compatible endpoints."""

from __future__ import annotations

import logging
import os
import random
import re
import threading
import time
from dataclasses import asdict, dataclass
from typing import Callable

import httpx

logger = logging.getLogger(__name__)

API_KEY_PREFIX = "GRS_API_KEY_"
BACKOFF_FACTOR = 2.0


class GatewayError(Exception):
    """Base class for failures talking to a model endpoint."""


class Timeout(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class ProtocolError(GatewayError):
    pass


class EmptyResponse(GatewayError):
    pass


@dataclass(frozen=True)
class ModelEndpoint:
    name: str
    base_url: str
    model_id: str
    temperature: float = 0.0
    max_output_tokens: int = 512
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 8
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"{self.name}: temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError(f"{self.name}: max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError(f"{self.name}: max_in_flight must be >= 1")
        if self.timeout <= 0:
            raise ValueError(f"{self.name}: timeout must be positive")

    @property
    def api_key_env(self) -> str:
        return API_KEY_PREFIX + re.sub(r"[^A-Za-z0-9]", "_", self.name).upper()

    @property
    def completions_url(self) -> str:
        return self.base_url.rstrip("/") + "/v1/chat/completions"

    def to_dict(self) -> dict:
        return asdict(self)


def request_body(endpoint: ModelEndpoint, prompt: str) -> dict:
    return {
        "model": endpoint.model_id,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.temperature,
        "max_tokens": endpoint.max_output_tokens,
    }


def extract_content(payload: object) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]  # type: ignore[index]
    except (KeyError, IndexError, TypeError):
        raise ProtocolError("response lacks choices[0].message.content") from None
    if content is None:
        content = ""
    if not isinstance(content, str):
        raise ProtocolError("message content is not a string")
    return content


class ChatClient:
    """Thread-safe client bound to one endpoint.

    At most ``endpoint.max_in_flight`` requests are outstanding at once;
    further callers block until a slot frees up.
    """

    def __init__(
        self,
        endpoint: ModelEndpoint,
        *,
        http: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.endpoint = endpoint
        self._http = http or httpx.Client()
        self._owns_http = http is None
        self._slots = threading.BoundedSemaphore(endpoint.max_in_flight)
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._rng_lock = threading.Lock()

    @property
    def name(self) -> str:
        return self.endpoint.name

    def close(self) -> None:
        if self._owns_http:
            self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.endpoint.api_key_env)
        return {"Authorization": f"Bearer {key}"} if key else {}

    def _backoff(self, attempt: int) -> float:
        cap = self.endpoint.backoff_base * BACKOFF_FACTOR**attempt
        with self._rng_lock:
            return self._rng.uniform(0.0, cap)

    def complete(self, prompt: str) -> str:
        ep = self.endpoint
        body = request_body(ep, prompt)
        last: GatewayError | None = None
        for attempt in range(ep.max_retries + 1):
            if attempt:
                self._sleep(self._backoff(attempt - 1))
            try:
                with self._slots:
                    resp = self._http.post(
                        ep.completions_url, json=body, headers=self._headers(), timeout=ep.timeout
                    )
            except httpx.TimeoutException as exc:
                last = Timeout(f"{ep.name}: no response within {ep.timeout}s ({exc.__class__.__name__})")
            except httpx.TransportError as exc:
                last = TransportError(f"{ep.name}: {exc.__class__.__name__}: {exc}")
            else:
                if resp.status_code >= 500:
                    last = TransportError(f"{ep.name}: HTTP {resp.status_code}")
                elif resp.status_code >= 400:
                    raise TransportError(f"{ep.name}: HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    try:
                        payload = resp.json()
                    except ValueError:
                        raise ProtocolError(f"{ep.name}: response body is not JSON") from None
                    content = extract_content(payload)
                    if not content.strip():
                        raise EmptyResponse(f"{ep.name}: empty completion")
                    return content
            logger.debug("attempt %d/%d failed: %s", attempt + 1, ep.max_retries + 1, last)
        assert last is not None
        raise last
