"""Shared domain types and the twelve-question interface configuration.

Everything in this module is a plain value type or a pure function, so the
rest of the system (store, engine, HTTP layer) can share these objects
freely across threads.
"""

import uuid
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from decimal import Decimal
from enum import Enum
from typing import Any, Mapping

# Study-facing defaults. The creation form and the HTTP layer must source
# defaults from here (single source of truth).
DEFAULT_PARTICIPANT_LABEL = "You"
DEFAULT_GPT_LABEL = "ChatGPT"
DEFAULT_FIRST_MESSAGE = "What can I help with?"
DEFAULT_TEMPERATURE = Decimal("1.0")
DEFAULT_MAX_MESSAGES = 20

STUDY_NAME_MAX_CHARS = 300
LABEL_MAX_CHARS = 100
MAX_MESSAGES_CEILING = 1000
TEMPERATURE_MIN = Decimal("0.0")
TEMPERATURE_MAX = Decimal("2.0")

# Config fields where an explicit empty string means "cleared": they are
# normalized to absent rather than kept as "".
_OPTIONAL_TEXT_FIELDS = (
    "system_prompt",
    "first_message",
    "prepend_text",
    "append_text",
    "api_key",
    "top_html",
)


class AccessMode(str, Enum):
    """How participants reach the chat interface from the survey."""

    NEW_TAB = "new_tab"
    EMBEDDED = "embedded"


class Role(str, Enum):
    """Speaker of one upstream message, in chat-completions terms."""

    SYSTEM = "system"
    ASSISTANT = "assistant"
    USER = "user"


@dataclass(frozen=True)
class UpstreamMessage:
    """One turn of the message list sent to the completion provider."""

    role: Role
    content: str


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """UTC ISO-8601 with millisecond precision and a Z suffix."""
    return (
        dt.astimezone(timezone.utc)
        .isoformat(timespec="milliseconds")
        .replace("+00:00", "Z")
    )


@dataclass(frozen=True)
class InterfaceConfig:
    """One fully-resolved chat interface definition.

    Instances are immutable once created; to change an interface a
    researcher creates a new one. ``api_key``, ``system_prompt``,
    ``prepend_text`` and ``append_text`` must never reach any
    participant-facing payload.
    """

    interface_id: str
    study_name: str
    access_mode: AccessMode
    max_messages: int
    participant_label: str
    gpt_label: str
    temperature: Decimal
    system_prompt: str | None = None
    first_message: str | None = None
    prepend_text: str | None = None
    append_text: str | None = None
    api_key: str | None = field(default=None, repr=False)
    top_html: str | None = None
    owner_id: str | None = None
    created_at: datetime = field(default_factory=utc_now)


@dataclass(frozen=True)
class ResearcherAccount:
    """An account identified by a unique, case-normalized email address."""

    researcher_id: str
    display_name: str
    email: str
    password_hash: str = field(repr=False)
    created_at: datetime = field(default_factory=utc_now)


@dataclass(frozen=True)
class ParticipantSession:
    """One participant's conversation state under one interface.

    ``participant_id`` is the value the survey later holds in its
    ``g4r_pid`` embedded-data field; it is the join key for exports.
    """

    session_id: str
    interface_id: str
    participant_id: str
    messages_sent: int
    started_at: datetime = field(default_factory=utc_now)


@dataclass(frozen=True)
class MessageExchange:
    """One (participant message, model reply) pair with its capture time.

    ``participant_message`` is the raw typed text; any configured
    prepend/append injection appears only in the upstream payload.
    """

    session_id: str
    seq: int
    participant_message: str
    gpt_message: str
    exchanged_at: datetime = field(default_factory=utc_now)


@dataclass(frozen=True)
class FieldError:
    """A single violated bound, identifying the field and the rule."""

    field: str
    code: str
    message: str


def _normalized_optional(value: Any) -> str | None:
    # Empty string means the researcher cleared the field.
    if value is None or value == "":
        return None
    return value


def _as_decimal(value: Any) -> Decimal:
    if isinstance(value, Decimal):
        return value
    return Decimal(str(value))


def apply_defaults(
    partial: Mapping[str, Any],
    *,
    owner_id: str | None = None,
    now: datetime | None = None,
) -> InterfaceConfig:
    """Fill the unsupplied questions of a partial configuration.

    Supplied values are kept exactly as given (validation is a separate
    step); empty strings in optional fields count as cleared. Guest
    configurations (no owner) with no study name receive an automatic
    ``guest-<timestamp>`` name, since the study-name question is hidden
    for guests.
    """
    created_at = partial.get("created_at") or now or utc_now()
    owner = partial.get("owner_id", owner_id)

    study_name = _normalized_optional(partial.get("study_name"))
    if study_name is None:
        if owner is None:
            study_name = "guest-" + format_timestamp(created_at)
        else:
            study_name = ""

    access_mode = partial.get("access_mode")
    if access_mode is None or access_mode == "":
        access_mode = AccessMode.NEW_TAB
    else:
        access_mode = AccessMode(access_mode)

    max_messages = partial.get("max_messages")
    if max_messages is None:
        max_messages = DEFAULT_MAX_MESSAGES

    temperature = partial.get("temperature")
    if temperature is None or temperature == "":
        temperature = DEFAULT_TEMPERATURE
    else:
        temperature = _as_decimal(temperature)

    optional: dict[str, str | None] = {}
    for name in _OPTIONAL_TEXT_FIELDS:
        if name in partial:
            optional[name] = _normalized_optional(partial[name])
        elif name == "first_message":
            optional[name] = DEFAULT_FIRST_MESSAGE
        else:
            optional[name] = None

    # Labels are required fields with defaults: absent/None means "use the
    # default", while a supplied empty string is kept so validation can
    # report EmptyLabel instead of silently restoring the default.
    participant_label = partial.get("participant_label")
    if participant_label is None:
        participant_label = DEFAULT_PARTICIPANT_LABEL
    gpt_label = partial.get("gpt_label")
    if gpt_label is None:
        gpt_label = DEFAULT_GPT_LABEL

    return InterfaceConfig(
        interface_id=partial.get("interface_id") or uuid.uuid4().hex,
        study_name=study_name,
        access_mode=access_mode,
        max_messages=max_messages,
        participant_label=participant_label,
        gpt_label=gpt_label,
        temperature=temperature,
        system_prompt=optional["system_prompt"],
        first_message=optional["first_message"],
        prepend_text=optional["prepend_text"],
        append_text=optional["append_text"],
        api_key=optional["api_key"],
        top_html=optional["top_html"],
        owner_id=owner,
        created_at=created_at,
    )


def config_to_partial(cfg: InterfaceConfig) -> dict[str, Any]:
    """Dump a config back to the mapping form ``apply_defaults`` accepts."""
    return {f.name: getattr(cfg, f.name) for f in fields(InterfaceConfig)}


def validate_config(cfg: InterfaceConfig) -> list[FieldError]:
    """Check every bounded field; an empty list means the config is valid.

    One error is reported per violated field, naming the bound so the
    creation form can render the problem inline.
    """
    errors: list[FieldError] = []

    if len(cfg.study_name) == 0:
        errors.append(
            FieldError("study_name", "StudyNameEmpty", "study name is required")
        )
    elif len(cfg.study_name) > STUDY_NAME_MAX_CHARS:
        errors.append(
            FieldError(
                "study_name",
                "StudyNameTooLong",
                f"study name must be at most {STUDY_NAME_MAX_CHARS} characters",
            )
        )

    if (
        not isinstance(cfg.max_messages, int)
        or isinstance(cfg.max_messages, bool)
        or cfg.max_messages < 0
        or cfg.max_messages > MAX_MESSAGES_CEILING
    ):
        errors.append(
            FieldError(
                "max_messages",
                "MaxMessagesOutOfRange",
                f"maximum number of messages must be an integer from 0 to {MAX_MESSAGES_CEILING}",
            )
        )

    if cfg.temperature < TEMPERATURE_MIN or cfg.temperature > TEMPERATURE_MAX:
        errors.append(
            FieldError(
                "temperature",
                "TemperatureOutOfRange",
                "temperature must be between 0.0 and 2.0 (inclusive)",
            )
        )

    for name in ("participant_label", "gpt_label"):
        label = getattr(cfg, name)
        if not label:
            errors.append(FieldError(name, "EmptyLabel", f"{name} must not be empty"))
        elif len(label) > LABEL_MAX_CHARS:
            errors.append(
                FieldError(
                    name,
                    "LabelTooLong",
                    f"{name} must be at most {LABEL_MAX_CHARS} characters",
                )
            )

    return errors
