"""Chat-completion sessions with transcript recording and replay.

Two backends sit behind one :class:`Session` API:

* ``ScriptedConfig`` replays responses positionally from a JSON Lines
  transcript (optionally checking that each request matches the recorded one);
* ``HttpConfig`` posts an OpenAI-style chat request to a configurable endpoint.

Every session keeps an append-only transcript that :func:`record` writes out
in the same format the scripted backend reads.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol, Sequence, Union

import httpx

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")


class LLMError(RuntimeError):
    pass


class ConfigError(LLMError):
    pass


class TranscriptLoadError(LLMError):
    pass


class TranscriptExhausted(LLMError):
    pass


class TranscriptMismatch(LLMError):
    pass


class HttpError(LLMError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        super().__init__(f"HTTP {status}: {body[:200]}")


class LLMTimeout(LLMError):
    pass


@dataclass(frozen=True)
class Message:
    role: str
    text: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.text}


@dataclass(frozen=True)
class PromptMessages:
    messages: tuple[Message, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("prompt must contain at least one message")
        if self.messages[0].role != "system":
            raise ValueError("first message must be the system (master) prompt")

    @classmethod
    def of(cls, system: str, *turns: tuple[str, str]) -> PromptMessages:
        return cls((Message("system", system), *(Message(r, t) for r, t in turns)))

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self):
        return iter(self.messages)

    def __getitem__(self, i: int) -> Message:
        return self.messages[i]

    def to_list(self) -> list[dict[str, str]]:
        return [m.to_dict() for m in self.messages]

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> PromptMessages:
        return cls(tuple(Message(d["role"], d["content"]) for d in items))

    def text(self) -> str:
        return "\n".join(f"{m.role}: {m.text}" for m in self.messages)


@dataclass(frozen=True)
class Exchange:
    request: PromptMessages | None
    response: str
    latency: float = 0.0
    backend: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "request": self.request.to_list() if self.request is not None else None,
            "response": self.response,
            "latency": self.latency,
            "backend": self.backend,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Exchange:
        req = data.get("request")
        return cls(
            PromptMessages.from_list(req) if req else None,
            data["response"],
            float(data.get("latency", 0.0)),
            data.get("backend", ""),
        )


def load_transcript(path: str | Path) -> list[Exchange]:
    path = Path(path)
    if not path.is_file():
        raise TranscriptLoadError(f"transcript not found: {path}")
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(Exchange.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise TranscriptLoadError(f"{path}:{lineno}: {exc}") from exc
    return out


def dump_transcript(exchanges: Sequence[Exchange], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for ex in exchanges:
            fh.write(json.dumps(ex.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
    return path


# ---- configs ----------------------------------------------------------------


@dataclass
class ScriptedConfig:
    transcript_path: str | Path | None = None
    exchanges: Sequence[Exchange] | None = None
    strict: bool = False


@dataclass
class HttpConfig:
    endpoint: str
    model: str
    auth_env: str | None = "OPENAI_API_KEY"
    temperature: float = 0.5
    max_tokens: int = 1024
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 1.0
    max_in_flight: int = 4
    # where the assistant text lives in the response JSON
    content_path: tuple[Union[str, int], ...] = ("choices", 0, "message", "content")
    extra_body: dict[str, Any] = field(default_factory=dict)
    transport: httpx.BaseTransport | None = None

    def validate(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.retries < 0:
            raise ConfigError(f"retry count must be >= 0, got {self.retries}")
        if self.max_tokens <= 0:
            raise ConfigError("max_tokens must be positive")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if not self.endpoint:
            raise ConfigError("endpoint is required")


BackendConfig = Union[ScriptedConfig, HttpConfig]


def config_from_dict(data: dict) -> BackendConfig:
    """Build a backend config from a JSON mapping with a ``kind`` key."""
    data = dict(data)
    kind = data.pop("kind", None)
    if kind == "scripted":
        return ScriptedConfig(**data)
    if kind == "http":
        if "content_path" in data:
            data["content_path"] = tuple(data["content_path"])
        try:
            return HttpConfig(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown backend kind {kind!r}")


# ---- backends -----------------------------------------------------------------


class Backend(Protocol):
    backend_id: str

    def complete(self, messages: PromptMessages) -> tuple[str, float | None]:
        """Return the assistant text and, if fixed by the backend, its latency."""


def _normalized_lines(text: str) -> list[str]:
    return [" ".join(line.split()) for line in text.splitlines() if line.strip()]


class ScriptedBackend:
    backend_id = "scripted"

    def __init__(self, exchanges: Sequence[Exchange], strict: bool = False):
        self.exchanges = list(exchanges)
        self.strict = strict
        self.position = 0

    def complete(self, messages: PromptMessages) -> tuple[str, float | None]:
        if self.position >= len(self.exchanges):
            raise TranscriptExhausted(f"transcript has only {len(self.exchanges)} exchange(s)")
        ex = self.exchanges[self.position]
        if self.strict and ex.request is not None:
            want, got = _normalized_lines(ex.request.text()), _normalized_lines(messages.text())
            if want != got:
                for i, (w, g) in enumerate(zip(want, got), start=1):
                    if w != g:
                        raise TranscriptMismatch(
                            f"exchange {self.position + 1}: request differs at line {i}: expected {w!r}, got {g!r}"
                        )
                i = min(len(want), len(got)) + 1
                raise TranscriptMismatch(
                    f"exchange {self.position + 1}: request differs at line {i}: "
                    f"expected {len(want)} lines, got {len(got)}"
                )
        self.position += 1
        return ex.response, ex.latency


def _dig(data: Any, path: Sequence[Union[str, int]]) -> Any:
    for key in path:
        data = data[key]
    return data


class HttpBackend:
    def __init__(self, config: HttpConfig, token: str | None, semaphore: threading.Semaphore):
        self.config = config
        self.token = token
        self.semaphore = semaphore
        self.backend_id = f"http:{config.model}"
        self._client = httpx.Client(timeout=config.timeout, transport=config.transport)

    def _payload(self, messages: PromptMessages) -> dict:
        return {
            "model": self.config.model,
            "messages": messages.to_list(),
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            **self.config.extra_body,
        }

    def complete(self, messages: PromptMessages) -> tuple[str, float | None]:
        cfg = self.config
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        payload = self._payload(messages)
        last: Exception | None = None
        for attempt in range(cfg.retries + 1):
            if attempt:
                time.sleep(cfg.backoff * 2 ** (attempt - 1))
            try:
                with self.semaphore:
                    resp = self._client.post(cfg.endpoint, json=payload, headers=headers)
            except httpx.TimeoutException as exc:
                last = LLMTimeout(f"request timed out after {cfg.timeout}s")
                logger.warning("attempt %d: timeout (%s)", attempt + 1, exc)
                continue
            except httpx.TransportError as exc:
                last = LLMError(f"transport error: {exc}")
                logger.warning("attempt %d: transport error (%s)", attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = HttpError(resp.status_code, resp.text)
                logger.warning("attempt %d: HTTP %d", attempt + 1, resp.status_code)
                continue
            if resp.status_code >= 400:
                raise HttpError(resp.status_code, resp.text)
            try:
                text = _dig(resp.json(), cfg.content_path)
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise LLMError(f"unexpected response shape: {exc}") from exc
            if not isinstance(text, str):
                raise LLMError("assistant content is not a string")
            return text, None
        assert last is not None
        raise last

    def close(self) -> None:
        self._client.close()


# ---- sessions -------------------------------------------------------------------


class Session:
    """One conversation channel. Single-owner; never share across threads."""

    def __init__(self, backend: Backend):
        self.backend = backend
        self.exchanges: list[Exchange] = []

    def complete(self, messages: PromptMessages) -> str:
        start = time.perf_counter()
        text, fixed_latency = self.backend.complete(messages)
        latency = fixed_latency if fixed_latency is not None else round(time.perf_counter() - start, 6)
        self.exchanges.append(Exchange(messages, text, latency, self.backend.backend_id))
        return text

    @property
    def transcript(self) -> list[Exchange]:
        return list(self.exchanges)


class Gateway:
    """Opens sessions; HTTP sessions to one gateway share an in-flight limit."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._semaphores: dict[str, threading.Semaphore] = {}

    def _semaphore(self, cfg: HttpConfig) -> threading.Semaphore:
        with self._lock:
            if cfg.endpoint not in self._semaphores:
                self._semaphores[cfg.endpoint] = threading.Semaphore(cfg.max_in_flight)
            return self._semaphores[cfg.endpoint]

    def open_session(self, config: BackendConfig) -> Session:
        if isinstance(config, ScriptedConfig):
            if config.exchanges is not None:
                exchanges = list(config.exchanges)
            elif config.transcript_path is not None:
                exchanges = load_transcript(config.transcript_path)
            else:
                raise ConfigError("scripted backend needs a transcript path or exchanges")
            return Session(ScriptedBackend(exchanges, strict=config.strict))
        if isinstance(config, HttpConfig):
            config.validate()
            token = None
            if config.auth_env:
                token = os.environ.get(config.auth_env)
                if not token:
                    raise ConfigError(f"environment variable {config.auth_env} is not set")
            return Session(HttpBackend(config, token, self._semaphore(config)))
        raise ConfigError(f"unsupported backend config {type(config).__name__}")


_default_gateway = Gateway()


def open_session(config: BackendConfig) -> Session:
    return _default_gateway.open_session(config)


def record(session: Session, path: str | Path) -> Path:
    """Write the session transcript as JSON Lines."""
    try:
        return dump_transcript(session.exchanges, path)
    except OSError as exc:
        raise LLMError(f"cannot write transcript {path}: {exc}") from exc


def scripted_responses(responses: Iterable[str]) -> ScriptedConfig:
    """Convenience: a non-strict scripted config from bare response strings."""
    return ScriptedConfig(exchanges=[Exchange(None, r, 0.0, "scripted") for r in responses])
