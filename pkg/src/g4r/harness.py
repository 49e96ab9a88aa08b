"""Scripted-participant load driver and capture checker.

Exercises a *running* service the way a study does: create a researcher
account, create an interface, let N scripted participants chat with it
concurrently, download the transcript CSV, and check that every captured
row matches the script. Useful both as a pre-study smoke test against a
deployment and as the engine behind the end-to-end tests.

Script files are CSV with columns ``participant_id,text``; rows are sent
in file order, each participant's rows forming their conversation.
"""

import csv
import io
import secrets
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx

from .export import parse_long_csv


@dataclass(frozen=True)
class ScriptLine:
    participant_id: str
    text: str


@dataclass
class ParticipantOutcome:
    participant_id: str
    replies: list[str] = field(default_factory=list)
    capped_after: int | None = None  # messages accepted before the cap refused one
    errors: list[str] = field(default_factory=list)


@dataclass
class RunReport:
    interface_id: str
    outcomes: list[ParticipantOutcome]
    csv_text: str
    discrepancies: list[str]

    @property
    def ok(self) -> bool:
        return not self.discrepancies and not any(o.errors for o in self.outcomes)


def load_scripts(text: str) -> list[ScriptLine]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[:2] != ["participant_id", "text"]:
        raise ValueError("script file must have columns: participant_id,text")
    lines = []
    for row in reader:
        if not row:
            continue
        lines.append(ScriptLine(participant_id=row[0], text=row[1]))
    return lines


def group_by_participant(lines: list[ScriptLine]) -> dict[str, list[str]]:
    grouped: dict[str, list[str]] = {}
    for line in lines:
        grouped.setdefault(line.participant_id, []).append(line.text)
    return grouped


def _run_participant(
    client: httpx.Client, interface_id: str, participant_id: str, texts: list[str]
) -> ParticipantOutcome:
    outcome = ParticipantOutcome(participant_id=participant_id)
    resp = client.post(
        f"/api/interfaces/{interface_id}/sessions",
        json={"participant_id": participant_id},
    )
    if resp.status_code != 200:
        outcome.errors.append(f"session open failed: {resp.status_code} {resp.text}")
        return outcome
    session_id = resp.json()["session_id"]
    for index, text in enumerate(texts):
        resp = client.post(f"/api/sessions/{session_id}/messages", json={"text": text})
        if resp.status_code == 200:
            outcome.replies.append(resp.json()["reply"])
        elif resp.status_code == 409:
            outcome.capped_after = index
            break
        else:
            outcome.errors.append(
                f"message {index + 1} failed: {resp.status_code} {resp.text}"
            )
            break
    return outcome


def verify_capture(
    scripts: dict[str, list[str]],
    csv_text: str,
    max_messages: int,
    prepend: str | None = None,
    append: str | None = None,
) -> list[str]:
    """Compare a downloaded transcript CSV against the scripts.

    Returns human-readable discrepancy strings; empty means a perfect
    match. Checks that each participant's captured messages are exactly
    the first ``min(len(script), max_messages)`` script lines, in order
    and byte-for-byte. The captured participant messages must be the raw
    typed text, so the hidden prepend/append text appearing in one is
    flagged (replies are the backend's business and are not checked —
    a model may legitimately quote its instructions back).
    """
    discrepancies: list[str] = []
    captured: dict[str, list[tuple[str, str]]] = {}
    for pid, to_gpt, from_gpt in parse_long_csv(csv_text):
        captured.setdefault(pid, []).append((to_gpt, from_gpt))

    for pid, texts in scripts.items():
        expected = texts[:max_messages]
        rows = captured.pop(pid, [])
        got = [to_gpt for to_gpt, _ in rows]
        if got != expected:
            discrepancies.append(
                f"{pid}: captured messages {got!r} != scripted {expected!r}"
            )
        for seq, (to_gpt, _) in enumerate(rows, start=1):
            for name, sentinel in (("prepend", prepend), ("append", append)):
                if sentinel and sentinel in to_gpt:
                    discrepancies.append(
                        f"{pid} row {seq}: {name} text leaked into the captured message"
                    )
    for pid in captured:
        discrepancies.append(f"{pid}: captured but never scripted")
    return discrepancies


def run_scripts(
    base_url: str,
    lines: list[ScriptLine],
    concurrency: int = 10,
    interface_overrides: dict | None = None,
    timeout: float = 30.0,
) -> RunReport:
    """Full end-to-end run against a live service at ``base_url``."""
    scripts = group_by_participant(lines)
    with httpx.Client(base_url=base_url, timeout=timeout) as client:
        email = f"harness-{secrets.token_hex(6)}@example.com"
        password = secrets.token_urlsafe(12)
        resp = client.post(
            "/api/accounts",
            json={"name": "Harness Runner", "email": email, "password": password},
        )
        resp.raise_for_status()
        resp = client.post("/api/signin", json={"email": email, "password": password})
        resp.raise_for_status()
        token = resp.json()["token"]
        auth = {"Authorization": f"Bearer {token}"}

        payload = {"study_name": "harness run"}
        payload.update(interface_overrides or {})
        resp = client.post("/api/interfaces", json=payload, headers=auth)
        if resp.status_code != 201:
            raise RuntimeError(
                f"interface creation failed: {resp.status_code} {resp.text}"
            )
        body = resp.json()
        interface_id = body["interface_id"]
        max_messages = body["config"]["max_messages"]

        with ThreadPoolExecutor(max_workers=max(concurrency, 1)) as pool:
            futures = [
                pool.submit(_run_participant, client, interface_id, pid, texts)
                for pid, texts in scripts.items()
            ]
            outcomes = [future.result() for future in futures]

        resp = client.get(f"/api/interfaces/{interface_id}/messages.csv", headers=auth)
        resp.raise_for_status()
        csv_text = resp.text

    overrides = interface_overrides or {}
    discrepancies = verify_capture(
        scripts,
        csv_text,
        max_messages,
        prepend=overrides.get("prepend_text"),
        append=overrides.get("append_text"),
    )
    return RunReport(
        interface_id=interface_id,
        outcomes=outcomes,
        csv_text=csv_text,
        discrepancies=discrepancies,
    )
