"""Provider-agnostic chat-completion access with retry, rate limiting, and a
deterministic scripted transport for offline runs."""
from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Protocol

from . import quality
from .errors import (ArgumentError, ConfigurationError, CredentialError,
                     RequestTimeoutError, RoutingError, TransportError)


@dataclass(frozen=True)
class RateLimit:
    requests: int
    window_seconds: float

    def __post_init__(self):
        if self.requests < 1 or self.window_seconds <= 0:
            raise ArgumentError(f"invalid rate limit {self.requests}/{self.window_seconds}s")


@dataclass(frozen=True)
class ModelConfig:
    model_id: str
    provider_id: str
    temperature: float = 0.4
    max_output_tokens: int = 4096
    request_timeout: float = 60.0
    max_retries: int = 3
    rate_limit: RateLimit | None = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ArgumentError(f"temperature {self.temperature} outside [0, 2]")
        if self.request_timeout <= 0:
            raise ArgumentError("request_timeout must be positive")
        if self.max_output_tokens <= 0:
            raise ArgumentError("max_output_tokens must be positive")
        if self.max_retries < 0:
            raise ArgumentError("max_retries must be non-negative")

    def to_dict(self) -> dict:
        data = {
            "model": self.model_id,
            "provider": self.provider_id,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "request_timeout": self.request_timeout,
            "max_retries": self.max_retries,
        }
        if self.rate_limit:
            data["rate_limit"] = {"requests": self.rate_limit.requests,
                                  "window_seconds": self.rate_limit.window_seconds}
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelConfig":
        limit = data.get("rate_limit")
        return cls(
            model_id=data["model"],
            provider_id=data["provider"],
            temperature=float(data.get("temperature", 0.4)),
            max_output_tokens=int(data.get("max_output_tokens", 4096)),
            request_timeout=float(data.get("request_timeout", 60.0)),
            max_retries=int(data.get("max_retries", 3)),
            rate_limit=RateLimit(int(limit["requests"]), float(limit["window_seconds"]))
            if limit else None,
        )


@dataclass(frozen=True)
class RawCompletion:
    model_id: str
    request_fingerprint: str
    text: str
    latency: float
    attempt_count: int
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "request_fingerprint": self.request_fingerprint,
            "text": self.text,
            "latency": self.latency,
            "attempt_count": self.attempt_count,
            "timestamp": self.timestamp,
        }


def request_fingerprint(config: ModelConfig, prompt: str) -> str:
    payload = json.dumps({
        "model": config.model_id,
        "provider": config.provider_id,
        "temperature": config.temperature,
        "max_output_tokens": config.max_output_tokens,
        "prompt": prompt,
    }, sort_keys=True, ensure_ascii=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Transport(Protocol):
    def complete(self, config: ModelConfig, prompt: str) -> str: ...


class _SlidingWindowLimiter:
    """Per-provider request limiter over a sliding time window."""

    def __init__(self, limit: RateLimit, clock: Callable[[], float],
                 sleep: Callable[[float], None]):
        self.limit = limit
        self._clock = clock
        self._sleep = sleep
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= self.limit.window_seconds:
                    self._stamps.popleft()
                if len(self._stamps) < self.limit.requests:
                    self._stamps.append(now)
                    return
                wait = self.limit.window_seconds - (now - self._stamps[0])
            self._sleep(max(wait, 1e-6))


class Gateway:
    """Routes model queries to registered provider transports.

    Thread-safe: registration and per-provider limiter state are guarded, and
    concurrent queries per provider are bounded by a permit count. The clock
    and sleep seams exist so retry/backoff and rate-limit behaviour can be
    tested against a virtual clock.
    """

    def __init__(self, *, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep,
                 backoff_base: float = 0.5, backoff_cap: float = 30.0,
                 jitter: random.Random | None = None,
                 provider_permits: int = 4):
        self._clock = clock
        self._sleep = sleep
        self._backoff_base = backoff_base
        self._backoff_cap = backoff_cap
        self._jitter = jitter
        self._provider_permits = provider_permits
        self._transports: dict[str, Transport] = {}
        self._limiters: dict[tuple[str, int, float], _SlidingWindowLimiter] = {}
        self._semaphores: dict[str, threading.Semaphore] = {}
        self._lock = threading.Lock()

    def register_provider(self, provider_id: str, transport: Transport) -> None:
        with self._lock:
            if provider_id in self._transports:
                raise ConfigurationError(f"provider {provider_id!r} already registered")
            self._transports[provider_id] = transport
            self._semaphores[provider_id] = threading.Semaphore(self._provider_permits)

    def providers(self) -> list[str]:
        with self._lock:
            return sorted(self._transports)

    def _transport_for(self, config: ModelConfig) -> Transport:
        with self._lock:
            transport = self._transports.get(config.provider_id)
        if transport is None:
            raise RoutingError(
                f"model {config.model_id!r} routes to unregistered provider "
                f"{config.provider_id!r}")
        return transport

    def _limiter_for(self, config: ModelConfig) -> _SlidingWindowLimiter | None:
        if config.rate_limit is None:
            return None
        key = (config.provider_id, config.rate_limit.requests,
               config.rate_limit.window_seconds)
        with self._lock:
            limiter = self._limiters.get(key)
            if limiter is None:
                limiter = _SlidingWindowLimiter(config.rate_limit, self._clock, self._sleep)
                self._limiters[key] = limiter
            return limiter

    def _backoff_delay(self, attempt: int) -> float:
        delay = min(self._backoff_cap, self._backoff_base * (2 ** (attempt - 1)))
        if self._jitter is not None:
            delay += self._jitter.uniform(0, delay * 0.1)
        return delay

    def query_model(self, config: ModelConfig, prompt: str) -> RawCompletion:
        """Issue one completion request, retrying transient failures.

        Retries cover timeouts and retryable transport errors, up to
        max_retries extra attempts with capped exponential backoff; credential
        failures are never retried. The returned completion keeps the raw text
        verbatim along with latency and the attempt count.
        """
        transport = self._transport_for(config)
        limiter = self._limiter_for(config)
        semaphore = self._semaphores[config.provider_id]
        fingerprint = request_fingerprint(config, prompt)
        last_error: TransportError | None = None
        for attempt in range(1, config.max_retries + 2):
            if limiter is not None:
                limiter.acquire()
            started = self._clock()
            try:
                with semaphore:
                    text = transport.complete(config, prompt)
            except CredentialError:
                raise
            except TransportError as exc:
                last_error = exc
                if not exc.retryable or attempt > config.max_retries:
                    break
                self._sleep(self._backoff_delay(attempt))
                continue
            return RawCompletion(
                model_id=config.model_id,
                request_fingerprint=fingerprint,
                text=text,
                latency=self._clock() - started,
                attempt_count=attempt,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
        assert last_error is not None
        if isinstance(last_error, RequestTimeoutError):
            error = RequestTimeoutError(
                f"request to {config.model_id!r} timed out after {attempt} attempts",
                attempts=attempt)
        else:
            error = TransportError(
                f"request to {config.model_id!r} failed after {attempt} attempts: "
                f"{last_error}", status=last_error.status,
                retryable=last_error.retryable, attempts=attempt)
        raise error from last_error


class ScriptedFailure:
    """Sentinel outcome that makes the mock raise instead of answering."""

    def __init__(self, *, status: int | None = 503, retryable: bool = True,
                 timeout: bool = False, auth: bool = False):
        self.status = status
        self.retryable = retryable
        self.timeout = timeout
        self.auth = auth

    def raise_(self) -> None:
        if self.auth:
            raise CredentialError("scripted auth failure", status=self.status)
        if self.timeout:
            raise RequestTimeoutError("scripted timeout")
        raise TransportError(f"scripted failure (status {self.status})",
                             status=self.status, retryable=self.retryable)


_FR_LINE_RE = re.compile(r"^- \[(?P<id>[^\]]+)\] ", re.MULTILINE)


def prompt_fr_ids(prompt: str) -> list[str]:
    """FR ids listed in a prompt's requirement block, in order."""
    return _FR_LINE_RE.findall(prompt)


class MockTransport:
    """Deterministic offline transport.

    `script` maps a request fingerprint or an FR id to an outcome: a canned
    response string, a ScriptedFailure, or a list of those consumed one per
    call (the last repeats). Unscripted requests fall back to `default`:
    "template" synthesizes a schema-valid answer covering every FR id found
    in the prompt, "fail" raises, and any other string is returned verbatim.
    """

    def __init__(self, script: Mapping[str, object] | None = None, *,
                 default: str = "template",
                 nfrs_per_fr: int | Callable[[str, str], int] = 5):
        self._script = {k: list(v) if isinstance(v, list) else [v]
                        for k, v in (script or {}).items()}
        self._default = default
        self._nfrs_per_fr = nfrs_per_fr
        self._lock = threading.Lock()
        self.calls: list[dict] = []

    def _quota(self, model_id: str, fr_id: str) -> int:
        if callable(self._nfrs_per_fr):
            return self._nfrs_per_fr(model_id, fr_id)
        return self._nfrs_per_fr

    def template_response(self, model_id: str, fr_ids: list[str]) -> str:
        catalog = quality.attribute_catalog()
        entries = []
        for fr_id in fr_ids:
            for k in range(self._quota(model_id, fr_id)):
                attr = catalog[k % len(catalog)]
                entries.append({
                    "fr_id": fr_id,
                    "attribute": attr.canonical_name,
                    "subcharacteristic": attr.subcharacteristics[0],
                    "nfr": (f"The behaviour described by {fr_id} shall complete within "
                            f"{k + 1} seconds for 95% of requests."),
                    "justification": (f"Follows from {fr_id}: the stated behaviour "
                                      f"implies this bound (case {k + 1})."),
                })
        return json.dumps(entries, ensure_ascii=False)

    def _resolve_outcome(self, fingerprint: str, fr_ids: list[str]) -> object | None:
        with self._lock:
            keys = [fingerprint] + [k for k in sorted(self._script) if k in fr_ids]
            for key in keys:
                outcomes = self._script.get(key)
                if outcomes:
                    return outcomes.pop(0) if len(outcomes) > 1 else outcomes[0]
        return None

    def complete(self, config: ModelConfig, prompt: str) -> str:
        fingerprint = request_fingerprint(config, prompt)
        fr_ids = prompt_fr_ids(prompt)
        with self._lock:
            self.calls.append({"model_id": config.model_id,
                               "fingerprint": fingerprint, "fr_ids": fr_ids})
        outcome = self._resolve_outcome(fingerprint, fr_ids)
        if outcome is None:
            if self._default == "template":
                return self.template_response(config.model_id, fr_ids)
            if self._default == "fail":
                raise TransportError("unscripted request (default=fail)", status=503)
            return self._default
        if isinstance(outcome, ScriptedFailure):
            outcome.raise_()
        return str(outcome)


def mock_provider(script: Mapping[str, object] | None = None, *,
                  default: str = "template",
                  nfrs_per_fr: int | Callable[[str, str], int] = 5) -> MockTransport:
    return MockTransport(script, default=default, nfrs_per_fr=nfrs_per_fr)


# --- live HTTPS transports ---------------------------------------------------

_STYLES = ("openai", "anthropic", "gemini")

_DEFAULT_BASE_URLS = {
    "openai": "https://api.openai.com/v1",
    "anthropic": "https://api.anthropic.com",
    "gemini": "https://generativelanguage.googleapis.com",
}


class HttpChatTransport:
    """Chat-completion transport over a provider's public HTTPS API.

    Request construction is a pure function of (config, prompt) so the wire
    payload can be verified without network access. The API key comes from
    the `<PROVIDER_ID>_API_KEY` environment variable and is never written to
    run artifacts.
    """

    def __init__(self, provider_id: str, style: str, *, base_url: str | None = None,
                 api_key: str | None = None, client=None):
        if style not in _STYLES:
            raise ConfigurationError(f"unknown transport style {style!r}")
        self.provider_id = provider_id
        self.style = style
        self.base_url = (base_url or _DEFAULT_BASE_URLS[style]).rstrip("/")
        self._api_key = api_key
        self._client = client

    @property
    def api_key(self) -> str | None:
        if self._api_key is not None:
            return self._api_key
        return os.environ.get(f"{self.provider_id.upper()}_API_KEY")

    def build_request(self, config: ModelConfig, prompt: str) -> tuple[str, dict, dict]:
        """(url, headers, json body) for a single user-message completion."""
        key = self.api_key or ""
        if self.style == "openai":
            url = f"{self.base_url}/chat/completions"
            headers = {"Authorization": f"Bearer {key}"}
            body = {
                "model": config.model_id,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": config.temperature,
                "max_tokens": config.max_output_tokens,
            }
        elif self.style == "anthropic":
            url = f"{self.base_url}/v1/messages"
            headers = {"x-api-key": key, "anthropic-version": "2023-06-01"}
            body = {
                "model": config.model_id,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": config.temperature,
                "max_tokens": config.max_output_tokens,
            }
        else:  # gemini
            url = (f"{self.base_url}/v1beta/models/{config.model_id}:generateContent"
                   f"?key={key}")
            headers = {}
            body = {
                "contents": [{"parts": [{"text": prompt}]}],
                "generationConfig": {
                    "temperature": config.temperature,
                    "maxOutputTokens": config.max_output_tokens,
                },
            }
        headers["Content-Type"] = "application/json"
        return url, headers, body

    def extract_text(self, payload: dict) -> str:
        if self.style == "openai":
            return payload["choices"][0]["message"]["content"]
        if self.style == "anthropic":
            return "".join(block.get("text", "") for block in payload["content"])
        parts = payload["candidates"][0]["content"]["parts"]
        return "".join(p.get("text", "") for p in parts)

    def complete(self, config: ModelConfig, prompt: str) -> str:
        import httpx

        if not self.api_key:
            raise CredentialError(
                f"no API key for provider {self.provider_id!r}; set "
                f"{self.provider_id.upper()}_API_KEY")
        url, headers, body = self.build_request(config, prompt)
        client = self._client or httpx
        try:
            response = client.post(url, headers=headers, json=body,
                                   timeout=config.request_timeout)
        except httpx.TimeoutException as exc:
            raise RequestTimeoutError(f"request to {self.provider_id} timed out") from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"request to {self.provider_id} failed: {exc}") from exc
        status = response.status_code
        if status in (401, 403):
            raise CredentialError(f"{self.provider_id} rejected credentials", status=status)
        if status == 408 or status == 429 or status >= 500:
            raise TransportError(f"{self.provider_id} returned {status}",
                                 status=status, retryable=True)
        if status >= 400:
            raise TransportError(f"{self.provider_id} returned {status}: {response.text}",
                                 status=status, retryable=False)
        try:
            return self.extract_text(response.json())
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(
                f"{self.provider_id} returned an unexpected payload: {exc}",
                status=status, retryable=False) from exc


@dataclass
class GatewayConfig:
    models: list[ModelConfig]
    providers: dict[str, dict] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "GatewayConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        models = [ModelConfig.from_dict(m) for m in data.get("models", [])]
        providers = data.get("providers", {})
        missing = {m.provider_id for m in models} - set(providers)
        if missing:
            # Providers without an explicit descriptor default to the
            # OpenAI-compatible style.
            for provider_id in missing:
                providers[provider_id] = {"style": "openai"}
        return cls(models=models, providers=providers)


def build_gateway(config: GatewayConfig, *, mock: bool = False,
                  mock_transport: Transport | None = None, **gateway_kwargs) -> Gateway:
    """Create a gateway with one transport registered per provider.

    With mock=True every provider routes to the same deterministic mock
    (offline mode); otherwise each provider gets an HTTPS transport built
    from its descriptor.
    """
    gateway = Gateway(**gateway_kwargs)
    shared_mock = mock_transport or MockTransport()
    for provider_id, descriptor in sorted(config.providers.items()):
        if mock:
            gateway.register_provider(provider_id, shared_mock)
        else:
            gateway.register_provider(provider_id, HttpChatTransport(
                provider_id, descriptor.get("style", "openai"),
                base_url=descriptor.get("base_url")))
    return gateway
