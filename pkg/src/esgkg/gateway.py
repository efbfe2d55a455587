"""Provider-agnostic chat-model access with a content-addressed exchange store.

Every exchange is persisted as one JSON file named by its cache key, so the
same directory serves as a response cache during live runs and as a
fixture store for offline replay.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence, TypeVar

from .errors import ConfigError, MissingFixtureError, ParseError, PolicyError, TransportError

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

LIVE_PROVIDERS = ("openai", "anthropic")
CREDENTIAL_ENV = {"openai": "OPENAI_API_KEY", "anthropic": "ANTHROPIC_API_KEY"}


@dataclass(frozen=True)
class ModelSpec:
    provider_id: str
    model_id: str
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self):
        if not self.provider_id or not self.model_id:
            raise ConfigError("model spec needs both a provider id and a model id")
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens <= 0:
            raise ConfigError("max_output_tokens must be positive")

    @property
    def label(self) -> str:
        return f"{self.provider_id}/{self.model_id}"


def cache_key(
    *,
    provider_id: str,
    model_id: str,
    temperature: float,
    system_prompt: str,
    user_prompt: str,
) -> str:
    payload = {
        "modelId": model_id,
        "providerId": provider_id,
        "systemPrompt": system_prompt,
        "temperature": repr(float(temperature)),
        "userPrompt": user_prompt,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    model: ModelSpec
    # task/item label the exchange for audit and scripted answers; not hashed
    task: str = ""
    item: str = ""
    attempt: int = 0

    @property
    def key(self) -> str:
        return cache_key(
            provider_id=self.model.provider_id,
            model_id=self.model.model_id,
            temperature=self.model.temperature,
            system_prompt=self.system_prompt,
            user_prompt=self.user_prompt,
        )


@dataclass(frozen=True)
class ChatExchange:
    cache_key: str
    provider_id: str
    model_id: str
    temperature: float
    max_output_tokens: int
    system_prompt: str
    user_prompt: str
    response: str
    task: str = ""
    item: str = ""
    attempt: int = 0

    @classmethod
    def from_request(cls, request: ChatRequest, response: str) -> "ChatExchange":
        m = request.model
        return cls(request.key, m.provider_id, m.model_id, m.temperature, m.max_output_tokens,
                   request.system_prompt, request.user_prompt, response, request.task, request.item,
                   request.attempt)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str, source: str = "<exchange>") -> "ChatExchange":
        try:
            data = json.loads(text)
            exchange = cls(**data)
        except (json.JSONDecodeError, TypeError) as exc:
            raise ParseError(f"corrupt exchange record: {exc}", source=source) from None
        expected = cache_key(
            provider_id=exchange.provider_id,
            model_id=exchange.model_id,
            temperature=exchange.temperature,
            system_prompt=exchange.system_prompt,
            user_prompt=exchange.user_prompt,
        )
        if expected != exchange.cache_key:
            raise ParseError("exchange record does not hash to its cache key", source=source)
        return exchange


class ExchangeStore:
    """One file per exchange, ``<cache key>.json``. Reads are lock-free, writes serialized."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._lock = threading.Lock()

    def path_for(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> ChatExchange | None:
        path = self.path_for(key)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        return ChatExchange.from_json(text, source=path.name)

    def put(self, exchange: ChatExchange) -> None:
        with self._lock:
            self.directory.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(exchange.to_json())
            os.replace(tmp, self.path_for(exchange.cache_key))

    def keys(self) -> list[str]:
        if not self.directory.is_dir():
            return []
        return sorted(p.stem for p in self.directory.glob("*.json"))

    def load_all(self) -> dict[str, ChatExchange]:
        out = {}
        for key in self.keys():
            exchange = self.get(key)
            if exchange is not None:
                out[key] = exchange
        return out

    def digest(self) -> str:
        h = hashlib.sha256()
        for key in self.keys():
            h.update(key.encode())
            h.update(self.path_for(key).read_bytes())
        return h.hexdigest()


class Provider(Protocol):
    provider_id: str

    def complete(self, request: ChatRequest) -> str: ...


class FixtureProvider:
    """Answers exactly the recorded exchanges; anything else is a missing fixture."""

    provider_id = "fixture"

    def __init__(self, exchanges: Mapping[str, ChatExchange]):
        self.exchanges = dict(exchanges)

    def __contains__(self, key: str) -> bool:
        return key in self.exchanges

    def complete(self, request: ChatRequest) -> str:
        exchange = self.exchanges.get(request.key)
        if exchange is None:
            raise MissingFixtureError(
                request.key,
                f"missing fixture for prompt digest {request.key} "
                f"(task={request.task or '?'} item={request.item or '?'})",
            )
        return exchange.response


def register_fixtures(path: str | Path) -> FixtureProvider:
    """Build a fixture provider from a directory of recorded exchanges."""
    directory = Path(path)
    if not directory.is_dir():
        raise ConfigError(f"fixture directory not found: {directory}")
    exchanges = {}
    for file in sorted(directory.glob("*.json")):
        exchange = ChatExchange.from_json(file.read_text(encoding="utf-8"), source=file.name)
        if exchange.cache_key != file.stem:
            raise ParseError("file name does not match the record's cache key", source=file.name)
        exchanges[exchange.cache_key] = exchange
    return FixtureProvider(exchanges)


class ScriptedProvider:
    """Deterministic stand-in for a live model, answering from a (task, item) table.

    Used to record the demo fixtures. An answer may be a list, indexed by
    the request's repair attempt. Unknown (task, item) pairs raise
    MissingFixtureError so gaps in the script surface immediately.
    """

    provider_id = "scripted"

    def __init__(self, answers: Mapping[str, Mapping[str, object]], default: Mapping[str, str] | None = None):
        self.answers = {task: {str(k): v for k, v in items.items()} for task, items in answers.items()}
        self.default = dict(default or {})

    def complete(self, request: ChatRequest) -> str:
        items = self.answers.get(request.task, {})
        answer = items.get(request.item, self.default.get(request.task))
        if isinstance(answer, list):
            answer = answer[min(request.attempt, len(answer) - 1)]
        if answer is not None:
            return str(answer)
        raise MissingFixtureError(request.key, f"no scripted answer for task={request.task} item={request.item}")


class _HttpProvider:
    provider_id = ""
    endpoint = ""

    def __init__(self, api_key: str | None = None, client=None, timeout: float = 60.0):
        self._api_key = api_key
        self._client = client
        self._timeout = timeout

    def _key(self) -> str:
        key = self._api_key or os.environ.get(CREDENTIAL_ENV[self.provider_id])
        if not key:
            raise ConfigError(f"{CREDENTIAL_ENV[self.provider_id]} is not set")
        return key

    def _post(self, headers: dict, body: dict) -> dict:
        import httpx

        client = self._client or httpx.Client(timeout=self._timeout)
        try:
            resp = client.post(self.endpoint, headers=headers, json=body)
        except httpx.TransportError as exc:
            raise TransportError(f"{self.provider_id}: {exc}", retryable=True) from None
        finally:
            if self._client is None:
                client.close()
        if resp.status_code != 200:
            retryable = resp.status_code == 429 or resp.status_code >= 500
            raise TransportError(f"{self.provider_id} request failed", status=resp.status_code, retryable=retryable)
        try:
            return resp.json()
        except ValueError:
            raise TransportError(f"{self.provider_id}: response body is not JSON") from None


class OpenAIProvider(_HttpProvider):
    provider_id = "openai"
    endpoint = "https://api.openai.com/v1/chat/completions"

    def complete(self, request: ChatRequest) -> str:
        body = {
            "model": request.model.model_id,
            "temperature": request.model.temperature,
            "max_tokens": request.model.max_output_tokens,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
        }
        data = self._post({"Authorization": f"Bearer {self._key()}"}, body)
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            raise TransportError("openai: unexpected response shape") from None


class AnthropicProvider(_HttpProvider):
    provider_id = "anthropic"
    endpoint = "https://api.anthropic.com/v1/messages"

    def complete(self, request: ChatRequest) -> str:
        body = {
            "model": request.model.model_id,
            "temperature": request.model.temperature,
            "max_tokens": request.model.max_output_tokens,
            "system": request.system_prompt,
            "messages": [{"role": "user", "content": request.user_prompt}],
        }
        headers = {"x-api-key": self._key(), "anthropic-version": "2023-06-01"}
        data = self._post(headers, body)
        try:
            return "".join(block.get("text", "") for block in data["content"] if block.get("type") == "text")
        except (KeyError, TypeError):
            raise TransportError("anthropic: unexpected response shape") from None


@dataclass
class GatewayStats:
    cache_hits: int = 0
    fixture_hits: int = 0
    live_calls: int = 0


@dataclass
class Gateway:
    """Single entry point for model calls.

    Lookup order is the writable ``store`` (cache), then read-only fixture
    providers. On a miss the gateway calls the live provider, unless
    ``offline`` is set, in which case it raises PolicyError without touching
    the network.
    """

    providers: dict[str, Provider] = field(default_factory=dict)
    store: ExchangeStore | None = None
    fixtures: Sequence[FixtureProvider] = ()
    offline: bool = True
    parallelism: int = 4
    max_retries: int = 3
    backoff: float = 0.5
    sleep: Callable[[float], None] = time.sleep
    stats: GatewayStats = field(default_factory=GatewayStats)

    def __post_init__(self):
        self._stats_lock = threading.Lock()

    def _bump(self, name: str) -> None:
        with self._stats_lock:
            setattr(self.stats, name, getattr(self.stats, name) + 1)

    def check_model(self, model: ModelSpec) -> None:
        known = set(self.providers) | set(LIVE_PROVIDERS) | {"scripted"}
        if model.provider_id not in known:
            raise ConfigError(f"unknown provider {model.provider_id!r}")

    def complete(self, request: ChatRequest) -> str:
        self.check_model(request.model)
        key = request.key
        if self.store is not None:
            hit = self.store.get(key)
            if hit is not None:
                self._bump("cache_hits")
                return hit.response
        for fixtures in self.fixtures:
            if key in fixtures:
                self._bump("fixture_hits")
                return fixtures.complete(request)
        if self.offline:
            raise MissingFixtureError(
                key,
                f"offline: no cached or recorded response for prompt digest {key} "
                f"(task={request.task or '?'} item={request.item or '?'})",
            )
        provider = self.providers.get(request.model.provider_id)
        if provider is None:
            raise ConfigError(f"provider {request.model.provider_id!r} is not configured for live calls")
        response = self._call_with_retries(provider, request)
        self._bump("live_calls")
        if self.store is not None:
            self.store.put(ChatExchange.from_request(request, response))
        return response

    def _call_with_retries(self, provider: Provider, request: ChatRequest) -> str:
        attempt = 0
        while True:
            try:
                return provider.complete(request)
            except TransportError as exc:
                if not exc.retryable or attempt >= self.max_retries:
                    raise
                delay = self.backoff * (2 ** attempt)
                log.warning("transport error from %s, retrying in %.2fs: %s", provider.provider_id, delay, exc)
                self.sleep(delay)
                attempt += 1

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
        """Apply ``fn`` with bounded parallelism, preserving input order."""
        items = list(items)
        if self.parallelism <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
            return list(pool.map(fn, items))


def offline_gateway(fixture_dir: str | Path, parallelism: int = 1) -> Gateway:
    return Gateway(fixtures=[register_fixtures(fixture_dir)], offline=True, parallelism=parallelism)


def live_providers() -> dict[str, Provider]:
    return {"openai": OpenAIProvider(), "anthropic": AnthropicProvider()}


__all__ = [
    "AnthropicProvider",
    "ChatExchange",
    "ChatRequest",
    "ExchangeStore",
    "FixtureProvider",
    "Gateway",
    "ModelSpec",
    "OpenAIProvider",
    "PolicyError",
    "ScriptedProvider",
    "cache_key",
    "register_fixtures",
]
