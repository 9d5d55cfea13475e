"""Narrator backends: the single abstraction over any language model.

The engine never talks to a model directly; it builds a ``NarratorRequest``
and hands it to whatever implements ``complete``. Shipping implementations:

* ``ScriptedNarrator`` -- deterministic rule table, used for tests and
  golden runs (:mod:`fabula.narrator.scripted`),
* ``LiveNarrator`` -- OpenAI-compatible chat-completion HTTP backend
  (:mod:`fabula.narrator.live`),
* ``RetryingNarrator`` / ``AuditingNarrator`` -- decorators for retry
  policy and verbatim exchange logging.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import Callable, Protocol

from fabula.model import POIGNANCY_MAX, POIGNANCY_MIN

REQUEST_KINDS = (
    "rate-poignancy",
    "choose-objective",
    "resolve-action",
    "agent-dialogue-turn",
    "human-dialogue-turn",
    "dialogue-conclusion",
    "reflection-topics",
    "reflection-questions",
    "reflection-answers",
    "narrative-shift",
    "location-genesis",
    "mutation-rewrite",
)

# reply-length caps by request kind; anything unlisted gets the turn cap
MAX_REPLY_TOKENS = {
    "rate-poignancy": 64,
    "narrative-shift": 768,
}
DEFAULT_MAX_REPLY_TOKENS = 256


class NarratorError(Exception):
    """Base class for narrator failures."""


class RetryableNarratorError(NarratorError):
    """Transient failure (transport, non-2xx, malformed body); worth retrying."""


class NarratorUnavailableError(NarratorError):
    """Retries exhausted or the backend is definitively unreachable."""


class RateParseError(NarratorError):
    """The rating reply held no integer even after a retry."""


class ScriptLoadError(NarratorError):
    """A scripted rule file is malformed or incomplete."""


@dataclass
class NarratorRequest:
    """One prompt exchange: a task kind plus the two context blocks."""

    kind: str
    system_context: str
    user_context: str
    max_reply_tokens: int = DEFAULT_MAX_REPLY_TOKENS

    def __post_init__(self) -> None:
        if self.kind not in REQUEST_KINDS:
            raise ValueError(f"unknown narrator request kind '{self.kind}'")
        if not self.system_context or not self.user_context:
            raise ValueError("narrator request contexts must be non-empty")
        if self.max_reply_tokens < 1:
            raise ValueError("max_reply_tokens must be positive")


@dataclass
class NarratorResponse:
    text: str
    backend_id: str
    latency_ms: int = 0


class Narrator(Protocol):
    def complete(self, request: NarratorRequest) -> NarratorResponse: ...


def max_tokens_for(kind: str) -> int:
    return MAX_REPLY_TOKENS.get(kind, DEFAULT_MAX_REPLY_TOKENS)


class RetryingNarrator:
    """Retry decorator: exponential backoff, doubling per attempt.

    Only ``RetryableNarratorError`` is retried; anything else passes through.
    After ``max_attempts`` failures the last error is wrapped in
    ``NarratorUnavailableError``.
    """

    def __init__(
        self,
        inner: Narrator,
        max_attempts: int = 3,
        base_backoff_ms: int = 250,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.inner = inner
        self.max_attempts = max_attempts
        self.base_backoff_ms = base_backoff_ms
        self._sleep = sleep

    def complete(self, request: NarratorRequest) -> NarratorResponse:
        last: RetryableNarratorError | None = None
        for attempt in range(self.max_attempts):
            try:
                return self.inner.complete(request)
            except RetryableNarratorError as exc:
                last = exc
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.base_backoff_ms * (2**attempt) / 1000.0)
        raise NarratorUnavailableError(f"narrator unavailable after {self.max_attempts} attempts: {last}")


def with_retry(inner: Narrator, max_attempts: int = 3, base_backoff_ms: int = 250) -> RetryingNarrator:
    return RetryingNarrator(inner, max_attempts=max_attempts, base_backoff_ms=base_backoff_ms)


_INT_TOKEN = re.compile(r"-?\d+")


def parse_first_int(text: str) -> int | None:
    match = _INT_TOKEN.search(text)
    return int(match.group()) if match else None


def clamp_poignancy(value: int) -> int:
    return max(POIGNANCY_MIN, min(POIGNANCY_MAX, value))


def rate_poignancy(narrator: Narrator, text: str) -> int:
    """Ask the narrator how poignant a memory is, on the 1..10 scale.

    The first integer token in the reply wins; an unparsable reply earns one
    retry and then a ``RateParseError`` (callers apply the documented
    fallback).
    """
    if not text:
        raise ValueError("cannot rate empty text")
    request = NarratorRequest(
        kind="rate-poignancy",
        system_context=(
            "You assign each new memory an importance score on a 1 to 10 scale. "
            "Mundane events score low; emotionally or narratively significant events score high. "
            "Reply with a single integer."
        ),
        user_context=f"memory: {text}\nScore this memory from 1 to 10.",
        max_reply_tokens=max_tokens_for("rate-poignancy"),
    )
    for _ in range(2):
        reply = narrator.complete(request)
        value = parse_first_int(reply.text)
        if value is not None:
            return clamp_poignancy(value)
    raise RateParseError(f"no integer in rating reply for: {text[:60]}")
