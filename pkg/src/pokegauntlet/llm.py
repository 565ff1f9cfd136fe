"""Chat-completions transport with record and replay modes.

Requests are hashed over their canonical JSON so a cassette recorded once
can be replayed exactly. Responses for the same hash replay in FIFO order
(identical prompts at different points get their own answers back). A
replay miss is always loud and names the hash.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Protocol

import httpx

ENV_BASE_URL = "POKEAI_LLM_BASE_URL"
ENV_MODEL = "POKEAI_LLM_MODEL"
ENV_API_KEY = "POKEAI_LLM_API_KEY"

DEFAULT_TEMPERATURE = 0.0
DEFAULT_TIMEOUT_MS = 30_000
DEFAULT_MAX_RETRIES = 3
DEFAULT_MAX_IN_FLIGHT = 4


class TransportUnavailable(RuntimeError):
    """Timeouts or server errors that survived the retry."""


class EndpointConfigError(RuntimeError):
    """The endpoint rejected the request outright; a run-level problem."""


class ReplayMissError(EndpointConfigError):
    """The cassette has no (further) response for a request hash."""


@dataclass
class LlmEndpointConfig:
    """Where and how to reach the model endpoint.

    The API key is kept out of reprs and of anything the harness writes.
    """

    base_url: str = ""
    model_name: str = ""
    api_key: str = field(default="", repr=False)
    temperature: float = DEFAULT_TEMPERATURE
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_retries: int = DEFAULT_MAX_RETRIES
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT

    @classmethod
    def from_env(cls, env: Optional[dict] = None, **overrides) -> "LlmEndpointConfig":
        source = os.environ if env is None else env
        values = {
            "base_url": source.get(ENV_BASE_URL, ""),
            "model_name": source.get(ENV_MODEL, ""),
            "api_key": source.get(ENV_API_KEY, ""),
        }
        values.update(overrides)
        return cls(**values)

    def require_endpoint(self) -> None:
        missing = [
            name
            for name, value in (
                (ENV_BASE_URL, self.base_url),
                (ENV_MODEL, self.model_name),
            )
            if not value
        ]
        if missing:
            raise EndpointConfigError(
                f"live mode needs {' and '.join(missing)} set"
            )

    def public_dict(self) -> dict[str, object]:
        """Config echo that never includes the key itself."""
        return {
            "base_url": self.base_url,
            "model_name": self.model_name,
            "api_key_present": bool(self.api_key),
            "temperature": self.temperature,
            "timeout_ms": self.timeout_ms,
            "max_retries": self.max_retries,
            "max_in_flight": self.max_in_flight,
        }


def canonical_json(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_hash(payload: dict) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def build_chat_request(
    config: LlmEndpointConfig, system_text: str, user_text: str
) -> dict:
    return {
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": system_text},
            {"role": "user", "content": user_text},
        ],
        "temperature": config.temperature,
    }


def extract_content(body: dict) -> str:
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportUnavailable(f"malformed chat response: {exc!r}") from exc
    if not isinstance(content, str):
        raise TransportUnavailable("chat response content is not text")
    return content


class Transport(Protocol):
    """Sends one chat request, returns the full response body."""

    def send(self, payload: dict) -> dict: ...

    def close(self) -> None: ...


class LiveTransport:
    """Real HTTP calls. One retry with backoff on timeouts and 5xx."""

    def __init__(self, config: LlmEndpointConfig, *, backoff_seconds: float = 1.0):
        config.require_endpoint()
        self.config = config
        self.backoff_seconds = backoff_seconds
        self.calls_made = 0
        self._semaphore = threading.Semaphore(config.max_in_flight)
        self._client: Optional[httpx.Client] = None
        self._lock = threading.Lock()

    def _ensure_client(self) -> httpx.Client:
        with self._lock:
            if self._client is None:
                self._client = httpx.Client(
                    base_url=self.config.base_url.rstrip("/"),
                    timeout=self.config.timeout_ms / 1000.0,
                    headers=(
                        {"Authorization": f"Bearer {self.config.api_key}"}
                        if self.config.api_key
                        else {}
                    ),
                )
            return self._client

    def _post_once(self, payload: dict) -> dict:
        client = self._ensure_client()
        response = client.post("/chat/completions", json=payload)
        if 400 <= response.status_code < 500:
            # Configuration problems never resolve by retrying; fail the run.
            raise EndpointConfigError(
                f"endpoint returned {response.status_code}: {response.text[:200]}"
            )
        if response.status_code >= 500:
            raise TransportUnavailable(
                f"endpoint returned {response.status_code}"
            )
        try:
            return response.json()
        except json.JSONDecodeError as exc:
            raise TransportUnavailable(f"endpoint sent invalid JSON: {exc}") from exc

    def send(self, payload: dict) -> dict:
        with self._semaphore:
            self.calls_made += 1
            try:
                return self._post_once(payload)
            except (httpx.TimeoutException, httpx.TransportError, TransportUnavailable):
                time.sleep(self.backoff_seconds)
                try:
                    self.calls_made += 1
                    return self._post_once(payload)
                except (httpx.TimeoutException, httpx.TransportError) as exc:
                    raise TransportUnavailable(
                        f"endpoint unreachable after retry: {exc!r}"
                    ) from exc

    def close(self) -> None:
        if self._client is not None:
            self._client.close()


class RecordTransport:
    """Wraps another transport, appending each exchange to a cassette."""

    def __init__(self, inner: Transport, cassette_path: Path | str):
        self.inner = inner
        self.cassette_path = Path(cassette_path)
        self.cassette_path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def send(self, payload: dict) -> dict:
        body = self.inner.send(payload)
        line = canonical_json(
            {
                "request_hash": request_hash(payload),
                "request": payload,
                "response": body,
                "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            }
        )
        with self._lock, self.cassette_path.open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")
        return body

    def close(self) -> None:
        self.inner.close()


class ReplayTransport:
    """Serves recorded responses; never touches the network.

    Responses replay FIFO per request hash so repeated identical prompts
    get their recorded sequence back.
    """

    def __init__(self, cassette_path: Path | str):
        self.cassette_path = Path(cassette_path)
        if not self.cassette_path.is_file():
            raise EndpointConfigError(f"cassette not found: {self.cassette_path}")
        self._responses: dict[str, deque[dict]] = {}
        self.replayed = 0
        with self.cassette_path.open(encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    key = entry["request_hash"]
                    body = entry["response"]
                except (json.JSONDecodeError, KeyError) as exc:
                    raise EndpointConfigError(
                        f"{self.cassette_path}:{line_number}: bad cassette line: {exc!r}"
                    ) from exc
                self._responses.setdefault(key, deque()).append(body)

    def send(self, payload: dict) -> dict:
        key = request_hash(payload)
        queue = self._responses.get(key)
        if not queue:
            raise ReplayMissError(
                f"cassette {self.cassette_path} has no response left for request"
                f" hash {key}; the prompt or config differs from the recording"
            )
        self.replayed += 1
        return queue.popleft()

    def close(self) -> None:
        return None


class CallableTransport:
    """Adapter for tests and scripted runs: a function plays the model."""

    def __init__(self, responder: Callable[[dict], str | dict]):
        self.responder = responder
        self.calls_made = 0

    def send(self, payload: dict) -> dict:
        self.calls_made += 1
        result = self.responder(payload)
        if isinstance(result, dict):
            return result
        return {
            "choices": [{"index": 0, "message": {"role": "assistant", "content": result}}]
        }

    def close(self) -> None:
        return None
