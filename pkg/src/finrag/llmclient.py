"""Chat-completion clients: a remote HTTP provider and a scripted mock.

Both speak the same surface (``chat_complete``), so every pipeline stage —
generation, query enhancement, QA generation, judging — is provider
agnostic. The mock provider is first-class: with it the whole system is a
pure function of (corpus, config, scripts), which is what the offline test
suite relies on.
"""
from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field

import httpx

DEFAULT_TIMEOUT_S = 60.0
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_MAX_IN_FLIGHT = 4
API_KEY_ENV = "FINRAG_LLM_API_KEY"


class LlmError(Exception):
    """Base failure for chat completion calls."""


class LlmAuthError(LlmError):
    pass


class LlmTimeout(LlmError):
    pass


class LlmProviderError(LlmError):
    """Provider returned an error payload; kept verbatim for the trace."""

    def __init__(self, message: str, payload: object = None, status: int | None = None):
        super().__init__(message)
        self.payload = payload
        self.status = status


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.7
    top_p: float = 0.9
    max_tokens: int = 1024
    seed: int | None = None


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    total_tokens: int = 0


@dataclass(frozen=True)
class Completion:
    content: str
    finish_reason: str = "stop"
    usage: Usage = Usage()
    latency_ms: float = 0.0
    retries: int = 0
    params: DecodingParams = DecodingParams()
    provider: str = ""
    model: str = ""


def _check_messages(messages: list[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[-1].role != "user":
        raise ValueError("last message role must be 'user'")


class LlmClient:
    """Provider interface; concrete clients implement _complete."""

    provider_id = "base"
    model = ""

    def chat_complete(
        self, messages: list[ChatMessage], params: DecodingParams | None = None
    ) -> Completion:
        _check_messages(messages)
        return self._complete(messages, params or DecodingParams())

    def _complete(self, messages: list[ChatMessage], params: DecodingParams) -> Completion:
        raise NotImplementedError


@dataclass(frozen=True)
class ScriptEntry:
    pattern: str
    response: str
    is_regex: bool = False

    def matches(self, text: str) -> bool:
        if self.is_regex:
            return re.search(self.pattern, text) is not None
        return self.pattern in text


@dataclass(frozen=True)
class MockScript:
    """Ordered matcher table over the last user message; first match wins."""

    entries: tuple[ScriptEntry, ...] = ()
    default: str = ""

    def respond(self, last_user_message: str) -> str:
        for entry in self.entries:
            if entry.matches(last_user_message):
                return entry.response
        return self.default

    @classmethod
    def from_jsonl(cls, text: str) -> "MockScript":
        """Parse script lines: {"match": ..., "response": ..., "regex"?: bool}
        or {"default": ...}."""
        entries: list[ScriptEntry] = []
        default = ""
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"mock script line {lineno}: invalid JSON: {exc}") from exc
            if "default" in obj:
                default = str(obj["default"])
            elif "match" in obj and "response" in obj:
                entries.append(
                    ScriptEntry(
                        pattern=str(obj["match"]),
                        response=str(obj["response"]),
                        is_regex=bool(obj.get("regex", False)),
                    )
                )
            else:
                raise ValueError(
                    f"mock script line {lineno}: expected keys match+response or default"
                )
        return cls(entries=tuple(entries), default=default)

    @classmethod
    def from_file(cls, path: str) -> "MockScript":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read())


class MockChatClient(LlmClient):
    """Deterministic scripted provider; zero latency, zero network."""

    provider_id = "mock"

    def __init__(self, script: MockScript | None = None, model: str = "mock-chat"):
        self.script = script or MockScript()
        self.model = model

    def _complete(self, messages: list[ChatMessage], params: DecodingParams) -> Completion:
        last_user = next(m.content for m in reversed(messages) if m.role == "user")
        content = self.script.respond(last_user)
        prompt_tokens = sum(len(m.content.split()) for m in messages)
        return Completion(
            content=content,
            finish_reason="stop",
            usage=Usage(
                prompt_tokens=prompt_tokens,
                completion_tokens=len(content.split()),
                total_tokens=prompt_tokens + len(content.split()),
            ),
            latency_ms=0.0,
            params=params,
            provider=self.provider_id,
            model=self.model,
        )


class _TokenBucket:
    def __init__(self, rate_per_s: float, capacity: float):
        self.rate = rate_per_s
        self.capacity = capacity
        self.tokens = capacity
        self.updated = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


def api_key_for(provider_id: str, environ: dict[str, str] | None = None) -> str | None:
    env = os.environ if environ is None else environ
    return env.get(f"{API_KEY_ENV}__{provider_id.upper()}") or env.get(API_KEY_ENV)


class RemoteChatClient(LlmClient):
    """Client for the de-facto chat-completions JSON dialect.

    POST {base_url}/chat/completions with {model, messages, temperature,
    top_p, max_tokens}; bounded retry with exponential backoff on 429/5xx
    and transport errors. Backpressure is blocking: an in-flight semaphore
    (default 4) plus an optional token bucket.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        provider_id: str = "remote",
        timeout_s: float = DEFAULT_TIMEOUT_S,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_base_s: float = 1.0,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        rate_limit_per_s: float | None = None,
        api_key: str | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.provider_id = provider_id
        self.timeout_s = timeout_s
        self.max_attempts = max_attempts
        self.backoff_base_s = backoff_base_s
        self._semaphore = threading.Semaphore(max_in_flight)
        self._bucket = (
            _TokenBucket(rate_limit_per_s, max(rate_limit_per_s, 1.0))
            if rate_limit_per_s
            else None
        )
        self._api_key = api_key

    def _headers(self) -> dict[str, str]:
        key = self._api_key or api_key_for(self.provider_id)
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _complete(self, messages: list[ChatMessage], params: DecodingParams) -> Completion:
        body: dict = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        }
        if params.seed is not None:
            body["seed"] = params.seed

        start = time.monotonic()
        last_error: Exception | None = None
        with self._semaphore:
            for attempt in range(self.max_attempts):
                if self._bucket is not None:
                    self._bucket.acquire()
                if attempt:
                    time.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
                try:
                    resp = httpx.post(
                        f"{self.base_url}/chat/completions",
                        json=body,
                        headers=self._headers(),
                        timeout=self.timeout_s,
                    )
                except httpx.TimeoutException as exc:
                    last_error = LlmTimeout(f"request timed out after {self.timeout_s}s")
                    continue
                except httpx.HTTPError as exc:
                    last_error = LlmProviderError(f"transport error: {exc}")
                    continue
                if resp.status_code in (401, 403):
                    raise LlmAuthError(f"auth failure ({resp.status_code}): {resp.text}")
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = LlmProviderError(
                        f"provider error {resp.status_code}",
                        payload=_safe_json(resp),
                        status=resp.status_code,
                    )
                    continue
                if resp.status_code != 200:
                    raise LlmProviderError(
                        f"provider error {resp.status_code}",
                        payload=_safe_json(resp),
                        status=resp.status_code,
                    )
                return self._parse(resp, params, attempt, start)
        raise last_error if last_error is not None else LlmError("request failed")

    def _parse(
        self, resp: httpx.Response, params: DecodingParams, retries: int, start: float
    ) -> Completion:
        try:
            payload = resp.json()
            choice = payload["choices"][0]
            content = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmProviderError(
                f"malformed completion response: {exc}", payload=_safe_json(resp)
            ) from exc
        usage = payload.get("usage") or {}
        return Completion(
            content=content,
            finish_reason=choice.get("finish_reason", "stop"),
            usage=Usage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                total_tokens=int(usage.get("total_tokens", 0)),
            ),
            latency_ms=(time.monotonic() - start) * 1000.0,
            retries=retries,
            params=params,
            provider=self.provider_id,
            model=self.model,
        )


def _safe_json(resp: httpx.Response) -> object:
    try:
        return resp.json()
    except ValueError:
        return resp.text


@dataclass(frozen=True)
class ModelRegistry:
    """Configured (provider id, model id) pairs, in configuration order."""

    pairs: tuple[tuple[str, str], ...] = (("mock", "mock-chat"), ("mock", "mock-judge"))

    @classmethod
    def from_config(cls, providers: list[dict]) -> "ModelRegistry":
        pairs: list[tuple[str, str]] = []
        for entry in providers:
            pid = entry["id"]
            seen: set[str] = set()
            for model in entry.get("models", []):
                if model in seen:
                    raise ValueError(f"duplicate model id '{model}' under provider '{pid}'")
                seen.add(model)
                pairs.append((pid, model))
        return cls(pairs=tuple(pairs))


def list_models(registry: ModelRegistry | None = None) -> list[tuple[str, str]]:
    return list((registry or ModelRegistry()).pairs)
