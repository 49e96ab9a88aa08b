"""Durable persistence for accounts, interfaces, sessions, and exchanges.

Backed by a single SQLite file (location via G4R_DB_PATH) so a deployment
needs nothing beyond the Python process. Schema:

    accounts    researcher identities; passwords stored as salted scrypt
                hashes, never as plaintext
    tokens      opaque bearer tokens with expiry, issued at sign-in
    interfaces  one row per created chat interface; the per-interface
                API key is encrypted at rest (key file next to the DB)
    sessions    one row per (interface, participant) pair
    exchanges   one row per captured exchange, with a contiguous per-session
                sequence; also keeps the injected upstream text in an audit
                column that exports exclude

Any store honoring the same operation contracts can replace this one.
"""

import hashlib
import hmac
import os
import re
import secrets
import sqlite3
import threading
import uuid
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from pathlib import Path

from cryptography.fernet import Fernet, InvalidToken

from .models import (
    AccessMode,
    InterfaceConfig,
    MessageExchange,
    ParticipantSession,
    ResearcherAccount,
    utc_now,
)

MIN_PASSWORD_LENGTH = 8
TOKEN_LIFETIME = timedelta(hours=24)

# Interactive-login scrypt parameters (N, r, p).
_SCRYPT_N = 16384
_SCRYPT_R = 8
_SCRYPT_P = 1

_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")

AUTH_FAILED_MESSAGE = "invalid email or password"


class StoreError(Exception):
    pass


class DuplicateEmail(StoreError):
    pass


class WeakPassword(StoreError):
    pass


class InvalidEmail(StoreError):
    pass


class AuthFailed(StoreError):
    """Sign-in failed. Deliberately identical for unknown email and wrong
    password so the response does not reveal which accounts exist."""


class NotFound(StoreError):
    pass


class UnknownSession(StoreError):
    pass


class SequenceGap(StoreError):
    pass


def hash_password(password: str) -> str:
    """Salted scrypt hash, self-describing: algorithm$params$salt$digest."""
    salt = os.urandom(16)
    digest = hashlib.scrypt(
        password.encode("utf-8"),
        salt=salt,
        n=_SCRYPT_N,
        r=_SCRYPT_R,
        p=_SCRYPT_P,
        dklen=32,
    )
    return f"scrypt${_SCRYPT_N}${_SCRYPT_R}${_SCRYPT_P}${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    """Recompute with the stored parameters and compare in constant time."""
    try:
        algorithm, n, r, p, salt_hex, digest_hex = stored.split("$")
        if algorithm != "scrypt":
            return False
        expected = bytes.fromhex(digest_hex)
        actual = hashlib.scrypt(
            password.encode("utf-8"),
            salt=bytes.fromhex(salt_hex),
            n=int(n),
            r=int(r),
            p=int(p),
            dklen=len(expected),
        )
    except (ValueError, TypeError):
        return False
    return hmac.compare_digest(actual, expected)


# Hash of an unguessable password; verified against when an email is unknown
# so both failure paths cost one scrypt computation.
_DUMMY_HASH = hash_password(secrets.token_hex(16))

_SCHEMA = """
CREATE TABLE IF NOT EXISTS accounts (
    researcher_id TEXT PRIMARY KEY,
    display_name  TEXT NOT NULL,
    email         TEXT NOT NULL UNIQUE,
    password_hash TEXT NOT NULL,
    created_at    TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tokens (
    token         TEXT PRIMARY KEY,
    researcher_id TEXT NOT NULL REFERENCES accounts(researcher_id),
    expires_at    TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS interfaces (
    interface_id      TEXT PRIMARY KEY,
    study_name        TEXT NOT NULL,
    access_mode       TEXT NOT NULL,
    max_messages      INTEGER NOT NULL,
    participant_label TEXT NOT NULL,
    gpt_label         TEXT NOT NULL,
    temperature       TEXT NOT NULL,
    system_prompt     TEXT,
    first_message     TEXT,
    prepend_text      TEXT,
    append_text       TEXT,
    api_key_enc       TEXT,
    top_html          TEXT,
    owner_id          TEXT,
    created_at        TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    session_id     TEXT PRIMARY KEY,
    interface_id   TEXT NOT NULL REFERENCES interfaces(interface_id),
    participant_id TEXT NOT NULL,
    messages_sent  INTEGER NOT NULL DEFAULT 0,
    started_at     TEXT NOT NULL,
    UNIQUE (interface_id, participant_id)
);
CREATE TABLE IF NOT EXISTS exchanges (
    id                  INTEGER PRIMARY KEY AUTOINCREMENT,
    session_id          TEXT NOT NULL REFERENCES sessions(session_id),
    seq                 INTEGER NOT NULL,
    participant_message TEXT NOT NULL,
    gpt_message         TEXT NOT NULL,
    upstream_text       TEXT,
    exchanged_at        TEXT NOT NULL,
    UNIQUE (session_id, seq)
);
"""


def _dt_to_text(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat()


def _dt_from_text(text: str) -> datetime:
    return datetime.fromisoformat(text)


class Store:
    """All persistence operations. Safe under concurrent callers: each
    thread gets its own connection, writes run in immediate transactions,
    and WAL mode keeps readers unblocked."""

    def __init__(self, db_path: str | Path, key_path: str | Path | None = None):
        self._db_path = Path(db_path)
        self._key_path = (
            Path(key_path) if key_path else self._db_path.with_name(self._db_path.name + ".key")
        )
        self._local = threading.local()
        self._fernet: Fernet | None = None
        self._fernet_lock = threading.Lock()
        conn = self._conn()
        with conn:
            conn.executescript(_SCHEMA)

    def _conn(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = sqlite3.connect(self._db_path, timeout=30.0)
            conn.row_factory = sqlite3.Row
            conn.execute("PRAGMA journal_mode=WAL")
            conn.execute("PRAGMA busy_timeout=30000")
            conn.execute("PRAGMA foreign_keys=ON")
            self._local.conn = conn
        return conn

    def close(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
            self._local.conn = None

    def flush(self) -> None:
        """Checkpoint the WAL so the main DB file holds all committed data."""
        self._conn().execute("PRAGMA wal_checkpoint(TRUNCATE)")

    # -- secrets at rest ----------------------------------------------------

    def _cipher(self) -> Fernet:
        # The key file lives next to the DB; it must accompany the DB file
        # in backups for stored per-interface API keys to stay readable.
        with self._fernet_lock:
            if self._fernet is None:
                if self._key_path.exists():
                    key = self._key_path.read_bytes().strip()
                else:
                    key = Fernet.generate_key()
                    self._key_path.touch(mode=0o600)
                    self._key_path.write_bytes(key)
                self._fernet = Fernet(key)
            return self._fernet

    def _encrypt_key(self, api_key: str | None) -> str | None:
        if api_key is None:
            return None
        return self._cipher().encrypt(api_key.encode("utf-8")).decode("ascii")

    def _decrypt_key(self, token: str | None) -> str | None:
        if token is None:
            return None
        try:
            return self._cipher().decrypt(token.encode("ascii")).decode("utf-8")
        except InvalidToken:
            raise StoreError("stored API key cannot be decrypted with the current key file")

    # -- accounts -----------------------------------------------------------

    def create_account(self, name: str, email: str, password: str) -> ResearcherAccount:
        normalized = email.strip().lower()
        if not _EMAIL_RE.match(normalized):
            raise InvalidEmail("email address is not valid")
        if len(password) < MIN_PASSWORD_LENGTH:
            raise WeakPassword(
                f"password must be at least {MIN_PASSWORD_LENGTH} characters"
            )
        account = ResearcherAccount(
            researcher_id=uuid.uuid4().hex,
            display_name=name,
            email=normalized,
            password_hash=hash_password(password),
        )
        try:
            with self._conn() as conn:
                conn.execute(
                    "INSERT INTO accounts VALUES (?, ?, ?, ?, ?)",
                    (
                        account.researcher_id,
                        account.display_name,
                        account.email,
                        account.password_hash,
                        _dt_to_text(account.created_at),
                    ),
                )
        except sqlite3.IntegrityError:
            raise DuplicateEmail("an account with this email already exists")
        return account

    def verify_credentials(self, email: str, password: str) -> ResearcherAccount:
        row = self._conn().execute(
            "SELECT * FROM accounts WHERE email = ?", (email.strip().lower(),)
        ).fetchone()
        if row is None:
            # Burn the same hashing work as the known-email path.
            verify_password(password, _DUMMY_HASH)
            raise AuthFailed(AUTH_FAILED_MESSAGE)
        if not verify_password(password, row["password_hash"]):
            raise AuthFailed(AUTH_FAILED_MESSAGE)
        return self._account_from_row(row)

    def get_account(self, researcher_id: str) -> ResearcherAccount:
        row = self._conn().execute(
            "SELECT * FROM accounts WHERE researcher_id = ?", (researcher_id,)
        ).fetchone()
        if row is None:
            raise NotFound("unknown researcher")
        return self._account_from_row(row)

    @staticmethod
    def _account_from_row(row: sqlite3.Row) -> ResearcherAccount:
        return ResearcherAccount(
            researcher_id=row["researcher_id"],
            display_name=row["display_name"],
            email=row["email"],
            password_hash=row["password_hash"],
            created_at=_dt_from_text(row["created_at"]),
        )

    # -- sign-in tokens -----------------------------------------------------

    def issue_token(self, researcher_id: str) -> tuple[str, datetime]:
        token = secrets.token_urlsafe(32)
        expires_at = utc_now() + TOKEN_LIFETIME
        with self._conn() as conn:
            conn.execute(
                "INSERT INTO tokens VALUES (?, ?, ?)",
                (token, researcher_id, _dt_to_text(expires_at)),
            )
        return token, expires_at

    def resolve_token(self, token: str) -> ResearcherAccount:
        """Map a bearer token to its account; expired and unknown tokens fail
        the same way."""
        row = self._conn().execute(
            "SELECT * FROM tokens WHERE token = ?", (token,)
        ).fetchone()
        if row is None or _dt_from_text(row["expires_at"]) < utc_now():
            raise AuthFailed("invalid or expired token")
        return self.get_account(row["researcher_id"])

    # -- interfaces -----------------------------------------------------------

    def save_interface(self, cfg: InterfaceConfig) -> str:
        with self._conn() as conn:
            conn.execute(
                "INSERT INTO interfaces VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    cfg.interface_id,
                    cfg.study_name,
                    cfg.access_mode.value,
                    cfg.max_messages,
                    cfg.participant_label,
                    cfg.gpt_label,
                    str(cfg.temperature),
                    cfg.system_prompt,
                    cfg.first_message,
                    cfg.prepend_text,
                    cfg.append_text,
                    self._encrypt_key(cfg.api_key),
                    cfg.top_html,
                    cfg.owner_id,
                    _dt_to_text(cfg.created_at),
                ),
            )
        return cfg.interface_id

    def get_interface(self, interface_id: str) -> InterfaceConfig:
        row = self._conn().execute(
            "SELECT * FROM interfaces WHERE interface_id = ?", (interface_id,)
        ).fetchone()
        if row is None:
            raise NotFound("unknown interface")
        return InterfaceConfig(
            interface_id=row["interface_id"],
            study_name=row["study_name"],
            access_mode=AccessMode(row["access_mode"]),
            max_messages=row["max_messages"],
            participant_label=row["participant_label"],
            gpt_label=row["gpt_label"],
            temperature=Decimal(row["temperature"]),
            system_prompt=row["system_prompt"],
            first_message=row["first_message"],
            prepend_text=row["prepend_text"],
            append_text=row["append_text"],
            api_key=self._decrypt_key(row["api_key_enc"]),
            top_html=row["top_html"],
            owner_id=row["owner_id"],
            created_at=_dt_from_text(row["created_at"]),
        )

    def list_interfaces(self, researcher_id: str) -> list[tuple[str, str, datetime]]:
        """(interface_id, study_name, created_at) for one owner, newest first."""
        rows = self._conn().execute(
            "SELECT interface_id, study_name, created_at FROM interfaces"
            " WHERE owner_id = ? ORDER BY created_at DESC, rowid DESC",
            (researcher_id,),
        ).fetchall()
        return [
            (row["interface_id"], row["study_name"], _dt_from_text(row["created_at"]))
            for row in rows
        ]

    # -- sessions -------------------------------------------------------------

    def open_session(self, interface_id: str, participant_id: str) -> ParticipantSession:
        """Get or create the session for (interface, participant).

        Idempotent: repeated opens with the same pair return the same
        session, so a participant reloading the page resumes where they
        left off.
        """
        conn = self._conn()
        if (
            conn.execute(
                "SELECT 1 FROM interfaces WHERE interface_id = ?", (interface_id,)
            ).fetchone()
            is None
        ):
            raise NotFound("unknown interface")
        with conn:
            conn.execute(
                "INSERT OR IGNORE INTO sessions"
                " (session_id, interface_id, participant_id, messages_sent, started_at)"
                " VALUES (?, ?, ?, 0, ?)",
                (uuid.uuid4().hex, interface_id, participant_id, _dt_to_text(utc_now())),
            )
        row = conn.execute(
            "SELECT * FROM sessions WHERE interface_id = ? AND participant_id = ?",
            (interface_id, participant_id),
        ).fetchone()
        return self._session_from_row(row)

    def get_session(self, session_id: str) -> ParticipantSession:
        row = self._conn().execute(
            "SELECT * FROM sessions WHERE session_id = ?", (session_id,)
        ).fetchone()
        if row is None:
            raise UnknownSession("unknown session")
        return self._session_from_row(row)

    @staticmethod
    def _session_from_row(row: sqlite3.Row) -> ParticipantSession:
        return ParticipantSession(
            session_id=row["session_id"],
            interface_id=row["interface_id"],
            participant_id=row["participant_id"],
            messages_sent=row["messages_sent"],
            started_at=_dt_from_text(row["started_at"]),
        )

    # -- exchanges ------------------------------------------------------------

    def append_exchange(self, exchange: MessageExchange, upstream_text: str | None = None) -> None:
        """Persist one exchange atomically.

        The session's ``messages_sent`` is kept equal to the latest seq in
        the same transaction, so a crash can never leave the two out of
        step. ``upstream_text`` is the injected form actually sent upstream,
        kept for auditing and excluded from exports.
        """
        conn = self._conn()
        try:
            conn.execute("BEGIN IMMEDIATE")
            row = conn.execute(
                "SELECT messages_sent, MAX(exchanged_at) AS last_at FROM sessions"
                " LEFT JOIN exchanges USING (session_id) WHERE session_id = ?",
                (exchange.session_id,),
            ).fetchone()
            if row is None or row["messages_sent"] is None:
                raise UnknownSession("unknown session")
            if exchange.seq != row["messages_sent"] + 1:
                raise SequenceGap(
                    f"expected seq {row['messages_sent'] + 1}, got {exchange.seq}"
                )
            # Keep per-session capture times non-decreasing even if the wall
            # clock steps backwards between sends.
            exchanged_at = _dt_to_text(exchange.exchanged_at)
            if row["last_at"] is not None and exchanged_at < row["last_at"]:
                exchanged_at = row["last_at"]
            conn.execute(
                "INSERT INTO exchanges"
                " (session_id, seq, participant_message, gpt_message, upstream_text, exchanged_at)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                (
                    exchange.session_id,
                    exchange.seq,
                    exchange.participant_message,
                    exchange.gpt_message,
                    upstream_text,
                    exchanged_at,
                ),
            )
            conn.execute(
                "UPDATE sessions SET messages_sent = ? WHERE session_id = ?",
                (exchange.seq, exchange.session_id),
            )
            conn.execute("COMMIT")
        except BaseException:
            if conn.in_transaction:
                conn.execute("ROLLBACK")
            raise

    def fetch_session_exchanges(self, session_id: str) -> list[MessageExchange]:
        """One session's exchanges in seq order (the conversation history)."""
        rows = self._conn().execute(
            "SELECT * FROM exchanges WHERE session_id = ? ORDER BY seq", (session_id,)
        ).fetchall()
        return [self._exchange_from_row(row) for row in rows]

    def fetch_exchanges(self, interface_id: str) -> list[tuple[str, list[MessageExchange]]]:
        """All captured exchanges for an interface.

        Grouped by participant in first-seen order (order of each
        participant's first captured exchange), each group in seq order.
        """
        if (
            self._conn()
            .execute("SELECT 1 FROM interfaces WHERE interface_id = ?", (interface_id,))
            .fetchone()
            is None
        ):
            raise NotFound("unknown interface")
        rows = self._conn().execute(
            "SELECT s.participant_id AS participant_id, e.*"
            " FROM exchanges e JOIN sessions s ON s.session_id = e.session_id"
            " WHERE s.interface_id = ?"
            " ORDER BY (SELECT MIN(e2.id) FROM exchanges e2"
            "           WHERE e2.session_id = e.session_id), e.seq",
            (interface_id,),
        ).fetchall()
        grouped: list[tuple[str, list[MessageExchange]]] = []
        for row in rows:
            exchange = self._exchange_from_row(row)
            if grouped and grouped[-1][0] == row["participant_id"]:
                grouped[-1][1].append(exchange)
            else:
                grouped.append((row["participant_id"], [exchange]))
        return grouped

    @staticmethod
    def _exchange_from_row(row: sqlite3.Row) -> MessageExchange:
        return MessageExchange(
            session_id=row["session_id"],
            seq=row["seq"],
            participant_message=row["participant_message"],
            gpt_message=row["gpt_message"],
            exchanged_at=_dt_from_text(row["exchanged_at"]),
        )
