"""Upstream chat-completion providers.

Two implementations of the same one-method contract: a real client for any
endpoint speaking the OpenAI-compatible chat-completions wire format, and a
deterministic echo provider that makes end-to-end tests byte-exact without
an external account.
"""

import json
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Any, Protocol

import httpx

from .models import InterfaceConfig, Role, UpstreamMessage

DEFAULT_TIMEOUT_SECONDS = 60.0

ECHO_PREFIX = "echo: "


class ErrorKind(str, Enum):
    AUTH = "auth"
    RATE_LIMITED = "rate_limited"
    TIMEOUT = "timeout"
    MALFORMED = "malformed"


class ProviderError(Exception):
    """The upstream call failed; the send that triggered it consumed nothing."""

    def __init__(self, kind: ErrorKind, message: str):
        super().__init__(message)
        self.kind = kind


class MissingKey(Exception):
    """No API key available from either the interface or the server."""


def resolve_api_key(cfg: InterfaceConfig, server_default: str | None) -> str:
    """Pick the key for an upstream call; a per-interface key wins."""
    if cfg.api_key:
        return cfg.api_key
    if server_default:
        return server_default
    raise MissingKey(
        "no API key configured for this interface and no server default is set"
    )


@dataclass(frozen=True)
class CompletionRequest:
    """One upstream call: the composed message list plus generation knobs.

    The key travels only in the authorization header, never in the request
    body, so ``payload()`` round-trips everything except ``api_key``.
    """

    messages: tuple[UpstreamMessage, ...]
    temperature: Decimal
    model_id: str
    api_key: str = field(repr=False)

    def payload(self) -> dict[str, Any]:
        """The JSON body for the chat-completions wire format."""
        return {
            "model": self.model_id,
            "messages": [
                {"role": m.role.value, "content": m.content} for m in self.messages
            ],
            "temperature": float(self.temperature),
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any], api_key: str) -> "CompletionRequest":
        messages = tuple(
            UpstreamMessage(Role(m["role"]), m["content"]) for m in payload["messages"]
        )
        return cls(
            messages=messages,
            temperature=Decimal(str(payload["temperature"])),
            model_id=payload["model"],
            api_key=api_key,
        )


class CompletionProvider(Protocol):
    def complete(self, request: CompletionRequest) -> str:
        """Return the assistant reply text, or raise ProviderError."""
        ...


class EchoProvider:
    """Deterministic stand-in: replies with "echo: " + the last user turn.

    Identical requests give identical replies, so capture-fidelity tests can
    compare transcripts byte for byte. Requests are recorded for assertions
    on the exact upstream payload.
    """

    def __init__(self) -> None:
        self.requests: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> str:
        self.requests.append(request)
        for message in reversed(request.messages):
            if message.role is Role.USER:
                return ECHO_PREFIX + message.content
        raise ProviderError(ErrorKind.MALFORMED, "request contains no user message")


class FixedReplyProvider:
    """Always replies with the same text; useful when a test must keep the
    reply independent of the request content."""

    def __init__(self, reply: str = "All set.") -> None:
        self.reply = reply
        self.requests: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> str:
        self.requests.append(request)
        return self.reply


class FailingProvider:
    """Raises on every call; lets tests assert that failed sends persist
    nothing and consume no quota."""

    def __init__(self, kind: ErrorKind = ErrorKind.TIMEOUT) -> None:
        self.kind = kind
        self.calls = 0

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        raise ProviderError(self.kind, "injected failure")


class OpenAIChatClient:
    """Client for an OpenAI-compatible ``/chat/completions`` endpoint.

    The API key is sent as a bearer token and appears nowhere else: not in
    the body, not in logs, not in exception messages.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = DEFAULT_TIMEOUT_SECONDS,
        transport: httpx.BaseTransport | None = None,
    ):
        self._base_url = base_url.rstrip("/")
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def complete(self, request: CompletionRequest) -> str:
        url = self._base_url + "/chat/completions"
        try:
            response = self._client.post(
                url,
                json=request.payload(),
                headers={"Authorization": f"Bearer {request.api_key}"},
            )
        except httpx.TimeoutException as exc:
            raise ProviderError(ErrorKind.TIMEOUT, "upstream call timed out") from exc
        except httpx.HTTPError as exc:
            # Connection-level failures are retryable like timeouts.
            raise ProviderError(ErrorKind.TIMEOUT, "upstream unreachable") from exc

        if response.status_code in (401, 403):
            raise ProviderError(ErrorKind.AUTH, "upstream rejected the API key")
        if response.status_code == 429:
            raise ProviderError(ErrorKind.RATE_LIMITED, "upstream rate limit hit")
        if response.status_code >= 400:
            raise ProviderError(
                ErrorKind.MALFORMED,
                f"upstream returned status {response.status_code}",
            )

        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, LookupError, TypeError) as exc:
            raise ProviderError(
                ErrorKind.MALFORMED, "upstream response had no assistant message"
            ) from exc
        if not isinstance(content, str):
            raise ProviderError(
                ErrorKind.MALFORMED, "upstream assistant message was not text"
            )
        return content
