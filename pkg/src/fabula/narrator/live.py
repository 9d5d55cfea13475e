"""Live narrator speaking the OpenAI-compatible chat-completion protocol.

Any endpoint implementing ``POST {base_url}/chat/completions`` works;
connection details come from the constructor or the environment::

    NARRATOR_URL         base URL, e.g. https://api.example.com/v1
    NARRATOR_API_KEY     bearer token (optional)
    NARRATOR_MODEL       model name sent with every request
    NARRATOR_TIMEOUT_MS  request timeout, default 30000

Pair with ``with_retry`` for the standard retry policy; this class raises
``RetryableNarratorError`` on transport errors, non-2xx statuses and
malformed bodies.
"""

from __future__ import annotations

import os
import time
from typing import Any

import httpx

from fabula.narrator import (
    NarratorRequest,
    NarratorResponse,
    RetryableNarratorError,
)

DEFAULT_TIMEOUT_MS = 30_000


class LiveNarrator:
    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        extra_params: dict[str, Any] | None = None,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.backend_id = f"live:{model}"
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        # sampling parameters pass through untouched; defaults are the endpoint's
        self.extra_params = dict(extra_params or {})
        self._client = httpx.Client(
            headers=headers,
            timeout=timeout_ms / 1000.0,
            transport=transport,
        )

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "LiveNarrator":
        env = dict(os.environ if env is None else env)
        url = env.get("NARRATOR_URL")
        model = env.get("NARRATOR_MODEL")
        if not url or not model:
            raise ValueError("NARRATOR_URL and NARRATOR_MODEL must be set for the live narrator")
        return cls(
            base_url=url,
            model=model,
            api_key=env.get("NARRATOR_API_KEY"),
            timeout_ms=int(env.get("NARRATOR_TIMEOUT_MS", DEFAULT_TIMEOUT_MS)),
        )

    def complete(self, request: NarratorRequest) -> NarratorResponse:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_context},
                {"role": "user", "content": request.user_context},
            ],
            "max_tokens": request.max_reply_tokens,
            **self.extra_params,
        }
        started = time.monotonic()
        try:
            response = self._client.post(f"{self.base_url}/chat/completions", json=body)
        except httpx.HTTPError as exc:
            raise RetryableNarratorError(f"transport failure: {exc}") from exc
        latency_ms = int((time.monotonic() - started) * 1000)
        if response.status_code // 100 != 2:
            raise RetryableNarratorError(f"backend returned HTTP {response.status_code}")
        try:
            text = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise RetryableNarratorError(f"malformed completion body: {exc}") from exc
        if not isinstance(text, str) or not text:
            raise RetryableNarratorError("backend returned an empty completion")
        return NarratorResponse(text=text, backend_id=self.backend_id, latency_ms=latency_ms)

    def close(self) -> None:
        self._client.close()
