"""Model backends: the wire types, a scripted mock, and an HTTP client.

A backend is anything with ``complete(request) -> BackendResponse``.
Requests carry chat-style messages whose parts are text plus at most one
inline PNG image, except scoring requests, which may attach one image
per candidate being compared.

The mock backend replays scripted responses keyed by request kind and is
fully deterministic, which makes loop transcripts byte-reproducible in
tests and offline runs.  The HTTP backend speaks the common
chat-completions JSON shape with exponential backoff and bounded
concurrency.
"""

from __future__ import annotations

import base64
import json
import logging
import random
import threading
import time
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

REQUEST_KINDS = ("generation", "critique", "scoring")


class BackendError(Exception):
    """Base class for backend failures."""


class BackendTimeout(BackendError):
    pass


class RateLimited(BackendError):
    def __init__(self, message: str = "rate limited", retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class RemoteError(BackendError):
    """Non-retryable HTTP failure (4xx other than 429)."""

    def __init__(self, status: int, body: str = ""):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class ServerError(BackendError):
    """Retryable 5xx response."""

    def __init__(self, status: int):
        super().__init__(f"server error {status}")
        self.status = status


class ProtocolError(BackendError):
    """The response arrived but was not shaped as promised."""


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    text: str
    image_png: bytes | None = None

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")


@dataclass(frozen=True)
class BackendRequest:
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_output_tokens: int = 4096
    kind: str = "generation"

    def __post_init__(self):
        if self.kind not in REQUEST_KINDS:
            raise ValueError(f"bad request kind {self.kind!r}")
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError(f"temperature out of range: {self.temperature}")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if not self.messages:
            raise ValueError("request has no messages")
        images = sum(1 for m in self.messages if m.image_png is not None)
        # Scoring compares candidates side by side, so it alone may carry
        # several images; every other kind is one draft, one image.
        if self.kind != "scoring" and images > 1:
            raise ValueError(f"{self.kind} request carries {images} images (max 1)")

    def image_count(self) -> int:
        return sum(1 for m in self.messages if m.image_png is not None)


@dataclass(frozen=True)
class BackendResponse:
    text: str
    usage: dict | None = None
    latency_s: float = 0.0


# ---------------------------------------------------------------------------
# scripted mock

_ERROR_FACTORIES = {
    "timeout": lambda entry: BackendTimeout(entry.get("message", "scripted timeout")),
    "rate-limited": lambda entry: RateLimited(
        entry.get("message", "scripted rate limit"), entry.get("retry_after")
    ),
    "remote": lambda entry: RemoteError(
        int(entry.get("status", 400)), entry.get("message", "scripted failure")
    ),
    "server": lambda entry: ServerError(int(entry.get("status", 500))),
    "protocol": lambda entry: ProtocolError(entry.get("message", "scripted protocol error")),
}


class MockBackend:
    """Replays scripted responses, one stream per request kind.

    The script maps each kind ("generation", "critique", "scoring") to a
    list whose entries are either a plain string, ``{"text": ...}``, or
    ``{"error": kind, ...}`` to raise the corresponding failure.
    Correction requests draw from the "generation" stream: they ask for
    SVG output just like the initial draft does.  Running past the end
    of a stream raises ProtocolError.
    """

    def __init__(self, script: dict[str, list]):
        unknown = set(script) - set(REQUEST_KINDS)
        if unknown:
            raise ValueError(f"unknown script keys: {sorted(unknown)}")
        self._script = {kind: list(entries) for kind, entries in script.items()}
        self._cursor = {kind: 0 for kind in REQUEST_KINDS}
        self.requests: list[BackendRequest] = []

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def complete(self, request: BackendRequest) -> BackendResponse:
        self.requests.append(request)
        stream = self._script.get(request.kind, [])
        index = self._cursor[request.kind]
        if index >= len(stream):
            raise ProtocolError(
                f"mock script exhausted for kind {request.kind!r} (used {index})"
            )
        self._cursor[request.kind] = index + 1
        entry = stream[index]
        if isinstance(entry, str):
            return BackendResponse(text=entry, latency_s=0.0)
        if isinstance(entry, dict):
            if "error" in entry:
                factory = _ERROR_FACTORIES.get(entry["error"])
                if factory is None:
                    raise ValueError(f"unknown scripted error {entry['error']!r}")
                raise factory(entry)
            if "text" in entry:
                return BackendResponse(
                    text=entry["text"],
                    usage=entry.get("usage"),
                    latency_s=float(entry.get("latency_s", 0.0)),
                )
        raise ValueError(f"bad script entry at {request.kind}[{index}]: {entry!r}")


# ---------------------------------------------------------------------------
# HTTP client


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = ""
    model: str = ""
    api_key_env: str = ""
    timeout_s: float = 60.0
    max_retries: int = 4
    max_concurrency: int = 4
    backoff_base_s: float = 1.0
    backoff_factor: float = 2.0
    backoff_jitter: float = 0.2


class HttpBackend:
    """Chat-completions-style HTTP backend.

    Retries timeouts, connection failures, 429s, and 5xx responses with
    exponential backoff (base 1s, doubling, plus or minus 20% jitter),
    honoring Retry-After when the server sends one.  A semaphore caps
    in-flight requests.
    """

    def __init__(self, config: BackendConfig, session=None,
                 rng: random.Random | None = None, sleep=time.sleep):
        if not config.endpoint:
            raise ValueError("backend endpoint is required")
        self.config = config
        self._rng = rng if rng is not None else random.Random()
        self._sleep = sleep
        self._semaphore = threading.Semaphore(max(1, config.max_concurrency))
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self.last_delays: list[float] = []

    def complete(self, request: BackendRequest) -> BackendResponse:
        body = self._encode_request(request)
        headers = {"Content-Type": "application/json"}
        api_key = self._api_key()
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        self.last_delays = []
        started = time.monotonic()
        last_error: BackendError | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt > 0:
                delay = self._backoff_delay(attempt - 1, last_error)
                self.last_delays.append(delay)
                self._sleep(delay)
            try:
                response = self._post_once(body, headers)
            except BackendError as exc:
                if isinstance(exc, RemoteError):
                    raise
                last_error = exc
                logger.warning("backend attempt %d failed: %s", attempt + 1, exc)
                continue
            return BackendResponse(
                text=response[0],
                usage=response[1],
                latency_s=time.monotonic() - started,
            )
        assert last_error is not None
        raise last_error

    def _post_once(self, body: dict, headers: dict) -> tuple[str, dict | None]:
        import requests as requests_mod

        with self._semaphore:
            try:
                resp = self._session.post(
                    self.config.endpoint,
                    json=body,
                    headers=headers,
                    timeout=self.config.timeout_s,
                )
            except requests_mod.Timeout as exc:
                raise BackendTimeout(str(exc)) from exc
            except requests_mod.ConnectionError as exc:
                raise BackendTimeout(f"connection failed: {exc}") from exc

        if resp.status_code == 429:
            raise RateLimited(retry_after=_parse_retry_after(resp.headers))
        if resp.status_code >= 500:
            raise ServerError(resp.status_code)
        if resp.status_code != 200:
            raise RemoteError(resp.status_code, resp.text)
        try:
            payload = resp.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion payload: {exc}") from exc
        if not isinstance(text, str):
            raise ProtocolError("completion content is not a string")
        return text, payload.get("usage")

    def _backoff_delay(self, failure_index: int, error: BackendError | None) -> float:
        cfg = self.config
        delay = cfg.backoff_base_s * (cfg.backoff_factor ** failure_index)
        delay *= 1.0 + cfg.backoff_jitter * self._rng.uniform(-1.0, 1.0)
        if isinstance(error, RateLimited) and error.retry_after is not None:
            delay = max(delay, float(error.retry_after))
        return delay

    def _api_key(self) -> str:
        if not self.config.api_key_env:
            return ""
        import os

        return os.environ.get(self.config.api_key_env, "")

    def _encode_request(self, request: BackendRequest) -> dict:
        messages = []
        for message in request.messages:
            if message.image_png is None:
                messages.append({"role": message.role, "content": message.text})
            else:
                encoded = base64.b64encode(message.image_png).decode("ascii")
                messages.append({
                    "role": message.role,
                    "content": [
                        {"type": "text", "text": message.text},
                        {
                            "type": "image_url",
                            "image_url": {"url": f"data:image/png;base64,{encoded}"},
                        },
                    ],
                })
        return {
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }


def _parse_retry_after(headers) -> float | None:
    value = headers.get("Retry-After")
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        return None
