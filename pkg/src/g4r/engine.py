"""Conversation turn-taking: quota enforcement, prompt assembly, capture.

A turn proceeds strictly in this order:

1. refuse if the participant has reached the interface's message cap
2. assemble the upstream message list from stored history plus the new
   message (with prepend/append text applied to participant messages)
3. call the completion provider
4. persist the exchange only if the provider succeeded

Nothing is written on a failed upstream call, so a participant can retry
the same message without losing quota.
"""

import threading
from collections import defaultdict

from .gateway import (
    CompletionProvider,
    CompletionRequest,
    MissingKey,
    ProviderError,
    resolve_api_key,
)
from .models import (
    InterfaceConfig,
    MessageExchange,
    ParticipantSession,
    Role,
    UpstreamMessage,
    utc_now,
)
from .store import Store

CAP_MESSAGE = "You have sent the maximum allowed messages"

MAX_MESSAGE_BYTES = 32 * 1024


class CapReached(Exception):
    """The participant has used up the interface's message allowance."""

    def __init__(self) -> None:
        super().__init__(CAP_MESSAGE)


class UpstreamFailure(Exception):
    """The chat backend call failed; the exchange was not captured."""


class MessageTooLong(Exception):
    def __init__(self) -> None:
        super().__init__(f"message exceeds {MAX_MESSAGE_BYTES} bytes")


def wrap_message(cfg: InterfaceConfig, text: str) -> str:
    """Apply the interface's hidden prepend/append text to one participant
    message. Parts are joined with newlines; absent parts leave no trace,
    so an unconfigured interface sends the text byte-for-byte as typed.
    """
    parts = [part for part in (cfg.prepend_text, text, cfg.append_text) if part is not None]
    return "\n".join(parts)


def compose_upstream(
    cfg: InterfaceConfig,
    history: list[MessageExchange],
    new_text: str,
) -> tuple[UpstreamMessage, ...]:
    """Build the full message list for one completion call.

    System prompt first (when configured), then the researcher-written
    opening message as assistant (when configured), then every captured
    exchange in order, then the new participant message. Participant
    messages get the prepend/append wrapping; the stored history already
    holds raw text, so wrapping is applied here every time and therefore
    exactly once per message.
    """
    messages: list[UpstreamMessage] = []
    if cfg.system_prompt is not None:
        messages.append(UpstreamMessage(Role.SYSTEM, cfg.system_prompt))
    if cfg.first_message is not None:
        messages.append(UpstreamMessage(Role.ASSISTANT, cfg.first_message))
    for exchange in history:
        messages.append(UpstreamMessage(Role.USER, wrap_message(cfg, exchange.participant_message)))
        messages.append(UpstreamMessage(Role.ASSISTANT, exchange.gpt_message))
    messages.append(UpstreamMessage(Role.USER, wrap_message(cfg, new_text)))
    return tuple(messages)


class ChatEngine:
    """Drives participant conversations against a completion provider.

    Per-session locking serializes concurrent sends from the same session
    (e.g. double-clicked send button) so seq numbers stay contiguous and
    the cap cannot be overshot; different sessions proceed in parallel.
    """

    def __init__(
        self,
        store: Store,
        provider: CompletionProvider,
        model_id: str,
        server_api_key: str | None = None,
    ):
        self._store = store
        self._provider = provider
        self._model_id = model_id
        self._server_api_key = server_api_key
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks[session_id]

    def start_session(self, interface_id: str, participant_id: str) -> ParticipantSession:
        if not participant_id:
            raise ValueError("participant_id must not be empty")
        return self._store.open_session(interface_id, participant_id)

    def remaining_quota(self, cfg: InterfaceConfig, session: ParticipantSession) -> int:
        return max(cfg.max_messages - session.messages_sent, 0)

    def handle_participant_message(self, session_id: str, text: str) -> tuple[str, int]:
        """Run one full turn. Returns (reply, remaining quota after this turn).

        Raises CapReached before contacting the provider when the quota is
        exhausted, UpstreamFailure when the provider fails (nothing is
        persisted), MessageTooLong for oversized input.
        """
        if len(text.encode("utf-8")) > MAX_MESSAGE_BYTES:
            raise MessageTooLong()
        with self._session_lock(session_id):
            session = self._store.get_session(session_id)
            cfg = self._store.get_interface(session.interface_id)
            if session.messages_sent >= cfg.max_messages:
                raise CapReached()

            history = self._store.fetch_session_exchanges(session_id)
            messages = compose_upstream(cfg, history, text)
            try:
                api_key = resolve_api_key(cfg, self._server_api_key)
                request = CompletionRequest(
                    messages=messages,
                    temperature=cfg.temperature,
                    model_id=self._model_id,
                    api_key=api_key,
                )
                reply = self._provider.complete(request)
            except MissingKey:
                raise UpstreamFailure("no API key configured for this interface")
            except ProviderError as err:
                raise UpstreamFailure(str(err))

            seq = session.messages_sent + 1
            self._store.append_exchange(
                MessageExchange(
                    session_id=session_id,
                    seq=seq,
                    participant_message=text,
                    gpt_message=reply,
                    exchanged_at=utc_now(),
                ),
                upstream_text=messages[-1].content,
            )
            return reply, max(cfg.max_messages - seq, 0)
