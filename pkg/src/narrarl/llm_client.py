"""Chat-completion client for OpenAI-compatible endpoints, plus a scripted stub.

A chat client is any callable ``client(messages) -> str``. :class:`ChatClient`
talks HTTP; :class:`StubClient` replays canned responses for tests and
offline runs.
"""
from __future__ import annotations

import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence

import httpx

from .errors import (
    AuthMissing,
    ConfigError,
    HttpError,
    MalformedBody,
    ScriptExhausted,
    TransportFailure,
)

logger = logging.getLogger(__name__)

API_KEY_ENV = "NARRARL_API_KEY"

BACKOFF_BASE = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_JITTER = 0.5  # fraction of the nominal delay added at random

Message = dict[str, str]


class ChatFn(Protocol):
    def __call__(self, messages: Sequence[Message]) -> str: ...


@dataclass(frozen=True)
class ChatConfig:
    endpoint: str
    model: str
    temperature: float = 0.7
    timeout: float = 30.0
    max_attempts: int = 3
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if not self.endpoint:
            raise ConfigError("arbiter.chat.endpoint", "must be a non-empty URL")
        if not self.model:
            raise ConfigError("arbiter.chat.model", "must be a non-empty model id")
        if self.temperature < 0:
            raise ConfigError("arbiter.chat.temperature", f"must be >= 0, got {self.temperature}")
        if self.timeout <= 0:
            raise ConfigError("arbiter.chat.timeout_s", f"must be > 0, got {self.timeout}")
        if self.max_attempts < 1:
            raise ConfigError("arbiter.chat.max_attempts", f"must be >= 1, got {self.max_attempts}")
        if self.max_in_flight < 1:
            raise ConfigError("arbiter.chat.max_in_flight", f"must be >= 1, got {self.max_in_flight}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ChatConfig:
        known = {"endpoint", "model", "temperature", "timeout_s", "max_attempts", "max_in_flight"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"arbiter.chat.{extra[0]}", "unknown key")
        for key in ("endpoint", "model"):
            if key not in data:
                raise ConfigError(f"arbiter.chat.{key}", "required")
        kwargs: dict[str, Any] = {"endpoint": str(data["endpoint"]), "model": str(data["model"])}
        if "temperature" in data:
            kwargs["temperature"] = float(data["temperature"])
        if "timeout_s" in data:
            kwargs["timeout"] = float(data["timeout_s"])
        if "max_attempts" in data:
            kwargs["max_attempts"] = int(data["max_attempts"])
        if "max_in_flight" in data:
            kwargs["max_in_flight"] = int(data["max_in_flight"])
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "endpoint": self.endpoint,
            "model": self.model,
            "temperature": self.temperature,
            "timeout_s": self.timeout,
            "max_attempts": self.max_attempts,
            "max_in_flight": self.max_in_flight,
        }


def backoff_delay(retry: int, rng: random.Random) -> float:
    """Delay before retry number ``retry`` (0-based).

    Jitter stays below one doubling, so delays never decrease across retries.
    """
    nominal = BACKOFF_BASE * BACKOFF_FACTOR**retry
    return nominal * (1.0 + BACKOFF_JITTER * rng.random())


class ChatClient:
    """HTTP chat client with retry/backoff and a cap on concurrent requests."""

    def __init__(
        self,
        config: ChatConfig,
        *,
        api_key: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ) -> None:
        self.config = config
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._http = httpx.Client(timeout=config.timeout, transport=transport)
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._slots = threading.BoundedSemaphore(config.max_in_flight)
        self._lock = threading.Lock()
        self.last_attempts = 0
        self.last_delays: list[float] = []

    @property
    def url(self) -> str:
        return self.config.endpoint.rstrip("/") + "/chat/completions"

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> ChatClient:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def payload(self, messages: Sequence[Message]) -> dict[str, Any]:
        return {
            "model": self.config.model,
            "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
            "temperature": self.config.temperature,
        }

    def __call__(self, messages: Sequence[Message]) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        if not self.api_key:
            raise AuthMissing(f"set {API_KEY_ENV} to call {self.config.endpoint}")
        headers = {"Authorization": f"Bearer {self.api_key}"}
        body = self.payload(messages)

        delays: list[float] = []
        last_problem = ""
        for attempt in range(self.config.max_attempts):
            if attempt:
                delay = backoff_delay(attempt - 1, self._rng)
                delays.append(delay)
                self._sleep(delay)
            try:
                with self._slots:
                    resp = self._http.post(self.url, json=body, headers=headers)
            except httpx.TransportError as exc:
                last_problem = f"{type(exc).__name__}: {exc}"
                logger.warning("chat attempt %d failed: %s", attempt + 1, last_problem)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_problem = f"HTTP {resp.status_code}"
                logger.warning("chat attempt %d got %s", attempt + 1, last_problem)
                continue
            self._record(attempt + 1, delays)
            if resp.status_code >= 400:
                raise HttpError(resp.status_code, resp.text)
            return _content(resp)

        self._record(self.config.max_attempts, delays)
        raise TransportFailure(
            f"{self.url}: gave up after {self.config.max_attempts} attempts ({last_problem})"
        )

    def _record(self, attempts: int, delays: list[float]) -> None:
        with self._lock:
            self.last_attempts = attempts
            self.last_delays = delays


def _content(resp: httpx.Response) -> str:
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedBody(f"response lacks choices[0].message.content ({exc!r})") from None
    if not isinstance(content, str):
        raise MalformedBody("choices[0].message.content is not a string")
    return content


def chat(config: ChatConfig, messages: Sequence[Message], **kwargs: Any) -> str:
    """One-shot convenience wrapper around :class:`ChatClient`."""
    with ChatClient(config, **kwargs) as client:
        return client(messages)


class StubClient:
    """Replays ``script`` in order. Exception entries are raised instead of returned.

    ``delay`` seconds are slept inside each call, which makes latency
    accounting and concurrency limits observable in tests.
    """

    def __init__(
        self,
        script: Sequence[str | BaseException],
        *,
        delay: float = 0.0,
        max_in_flight: int | None = None,
    ) -> None:
        if not script:
            raise ValueError("script must be non-empty")
        self.script = list(script)
        self.delay = delay
        self.calls: list[list[Message]] = []
        self.in_flight = 0
        self.peak_in_flight = 0
        self._lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(max_in_flight) if max_in_flight else None

    @property
    def remaining(self) -> int:
        return len(self.script) - len(self.calls)

    def __call__(self, messages: Sequence[Message]) -> str:
        if self._slots is not None:
            with self._slots:
                return self._serve(messages)
        return self._serve(messages)

    def _serve(self, messages: Sequence[Message]) -> str:
        with self._lock:
            idx = len(self.calls)
            if idx >= len(self.script):
                raise ScriptExhausted(f"stub script has only {len(self.script)} entries")
            self.calls.append([dict(m) for m in messages])
            self.in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
        try:
            if self.delay:
                time.sleep(self.delay)
            entry = self.script[idx]
            if isinstance(entry, BaseException):
                raise entry
            return entry
        finally:
            with self._lock:
                self.in_flight -= 1


def stub_client(script: Sequence[str | BaseException], **kwargs: Any) -> StubClient:
    return StubClient(script, **kwargs)
