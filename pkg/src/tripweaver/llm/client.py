"""Minimal chat-completions client with bounded concurrency and backoff."""

from __future__ import annotations

import logging
import os
import threading
import time
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Optional

import httpx

log = logging.getLogger(__name__)

BASE_URL_ENV = "LLM_BASE_URL"
API_KEY_ENV = "LLM_API_KEY"


class LLMUnavailable(RuntimeError):
    """The endpoint could not be reached or kept failing after backoff."""


class LLMConfigError(ValueError):
    """The LLM core is selected but no endpoint is configured."""


@dataclass
class ChatClient:
    base_url: str
    model: str = "gpt-4o"
    temperature: float = 0.7
    api_key: Optional[str] = None
    max_parallel: int = 4
    timeout: float = 60.0
    transport_retries: int = 3
    backoff_seconds: float = 0.5
    _sem: threading.BoundedSemaphore = field(init=False, repr=False)
    _http: httpx.Client = field(init=False, repr=False)

    def __post_init__(self):
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        self._sem = threading.BoundedSemaphore(self.max_parallel)
        self._http = httpx.Client(timeout=self.timeout)

    @classmethod
    def from_env(cls, model: str = "gpt-4o", temperature: float = 0.7, max_parallel: int = 4,
                 env: Optional[Mapping[str, str]] = None, base_url_env: str = BASE_URL_ENV,
                 **kwargs) -> "ChatClient":
        env = os.environ if env is None else env
        url = env.get(base_url_env, "").strip()
        if not url:
            raise LLMConfigError(f"{base_url_env} is not set but a stage uses the llm core")
        return cls(url, model, temperature, env.get(API_KEY_ENV) or None, max_parallel, **kwargs)

    @property
    def endpoint(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"

    def complete(self, messages: list[dict], seed: Optional[int] = None) -> str:
        """Return the assistant message text for one chat request."""
        payload = {"model": self.model, "temperature": self.temperature, "messages": messages}
        if seed is not None:
            payload["seed"] = seed % (2**31)
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: Exception | None = None
        for attempt in range(self.transport_retries + 1):
            if attempt:
                time.sleep(self.backoff_seconds * 2 ** (attempt - 1))
            try:
                with self._sem:
                    resp = self._http.post(self.endpoint, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last = exc
                log.debug("transport error on attempt %d: %s", attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = LLMUnavailable(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise LLMUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise LLMUnavailable(f"unexpected response body: {exc}") from exc
        raise LLMUnavailable(f"gave up after {self.transport_retries + 1} attempts: {last}")

    def close(self) -> None:
        self._http.close()
