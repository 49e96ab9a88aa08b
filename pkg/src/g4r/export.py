"""Transcript export and survey-data merging.

Three related jobs, all speaking CSV:

* ``export_csv`` — the long-format download: one row per captured
  exchange, participants in first-seen order.
* ``pivot_wide`` — long to wide: one row per participant, exchange k in
  columns ``message_to_gpt_k`` / ``message_from_gpt_k``. Timestamps are
  dropped; everything else survives the reshape.
* ``merge_with_survey`` — left-join the wide form onto a survey export
  using its ``g4r_pid`` column, yielding one combined row per respondent
  ready for analysis.

All files are plain RFC-4180 CSV (CRLF rows, minimal quoting), which both
spreadsheets and statistics packages read without ceremony.
"""

import csv
import io
from dataclasses import dataclass, field

from .models import format_timestamp
from .snippet import EMBEDDED_DATA_KEY
from .store import Store

TRANSCRIPT_COLUMNS = ("participant_id", "message_to_gpt", "message_from_gpt", "timestamp")

EXPORT_FILENAME = "g4r_messages.csv"


class MergeError(Exception):
    """The merge inputs are unusable as given; nothing was written."""


@dataclass
class MergeResult:
    merged_csv: str
    matched: int
    survey_rows: int
    # Participant IDs with transcripts but no survey row, first-seen order.
    unmatched: list[str] = field(default_factory=list)


def _write_rows(rows: list[list[str]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerows(rows)
    return out.getvalue()


def export_csv(store: Store, interface_id: str) -> str:
    """Long-format transcript CSV for one interface."""
    rows: list[list[str]] = [list(TRANSCRIPT_COLUMNS)]
    for participant_id, exchanges in store.fetch_exchanges(interface_id):
        for exchange in exchanges:
            rows.append(
                [
                    participant_id,
                    exchange.participant_message,
                    exchange.gpt_message,
                    format_timestamp(exchange.exchanged_at),
                ]
            )
    return _write_rows(rows)


def parse_long_csv(text: str) -> list[tuple[str, str, str]]:
    """Read a long-format transcript CSV into (pid, to, from) tuples,
    preserving file order. The timestamp column is optional and ignored."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MergeError("messages file is empty")
    required = ("participant_id", "message_to_gpt", "message_from_gpt")
    try:
        indices = [header.index(name) for name in required]
    except ValueError as err:
        raise MergeError(f"messages file is missing a required column: {err}")
    rows = []
    for row in reader:
        if not row:
            continue
        rows.append(tuple(row[i] for i in indices))
    return rows


def wide_columns(k: int) -> list[str]:
    """Interleaved wide headers for up to k exchanges, in conversation
    order: to_1, from_1, to_2, from_2, ..."""
    columns = []
    for n in range(1, k + 1):
        columns.append(f"message_to_gpt_{n}")
        columns.append(f"message_from_gpt_{n}")
    return columns


def pivot_wide(long_rows: list[tuple[str, str, str]]) -> tuple[list[str], dict[str, list[str]]]:
    """Reshape long rows into (header, {pid: wide row values}).

    Participants keep first-seen order (dicts preserve insertion order);
    every row is padded to the width of the longest conversation.
    """
    by_pid: dict[str, list[str]] = {}
    for pid, to_gpt, from_gpt in long_rows:
        by_pid.setdefault(pid, []).extend([to_gpt, from_gpt])
    k = max((len(values) // 2 for values in by_pid.values()), default=0)
    header = ["participant_id"] + wide_columns(k)
    wide = {
        pid: values + [""] * (2 * k - len(values)) for pid, values in by_pid.items()
    }
    return header, wide


def pivot_csv(long_csv_text: str) -> str:
    """Long transcript CSV -> wide CSV, one row per participant."""
    header, wide = pivot_wide(parse_long_csv(long_csv_text))
    rows = [header] + [[pid] + values for pid, values in wide.items()]
    return _write_rows(rows)


def _read_survey(text: str, skip_rows: int) -> tuple[list[str], list[list[str]], int]:
    """Parse a survey export: header row, then ``skip_rows`` descriptive
    rows to discard (Qualtrics exports carry two), then data rows. Returns
    (header, data rows, file row number of the first data row)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MergeError("survey file is empty")
    for _ in range(skip_rows):
        next(reader, None)
    data = [row for row in reader if row]
    return header, data, 2 + skip_rows


def merge_with_survey(
    messages_csv: str,
    survey_csv: str,
    skip_rows: int = 0,
) -> MergeResult:
    """Join wide-form transcripts onto survey rows by ``g4r_pid``.

    Every survey row appears in the output exactly once, in file order,
    with the transcript columns appended (empty when the respondent has
    no transcript). Respondents whose ``g4r_pid`` cell is blank never
    match anything and are fine; two survey rows claiming the same
    non-blank ID is an error because the join would be ambiguous.
    """
    long_rows = parse_long_csv(messages_csv)
    wide_header, wide = pivot_wide(long_rows)
    message_columns = wide_header[1:]  # drop participant_id

    survey_header, survey_data, first_data_row = _read_survey(survey_csv, skip_rows)
    try:
        key_index = survey_header.index(EMBEDDED_DATA_KEY)
    except ValueError:
        raise MergeError(
            f"survey file has no {EMBEDDED_DATA_KEY} column; was the embedded"
            " data field set up in the survey flow?"
        )
    clash = [name for name in message_columns if name in survey_header]
    if clash:
        raise MergeError(
            f"survey file already contains transcript column names: {', '.join(clash)}"
        )

    seen_at: dict[str, int] = {}
    for offset, row in enumerate(survey_data):
        pid = row[key_index].strip() if key_index < len(row) else ""
        if not pid:
            continue
        row_number = first_data_row + offset
        if pid in seen_at:
            raise MergeError(
                f"duplicate {EMBEDDED_DATA_KEY} {pid!r} in survey rows"
                f" {seen_at[pid]} and {row_number}"
            )
        seen_at[pid] = row_number

    empty_transcript = [""] * len(message_columns)
    out_rows: list[list[str]] = [survey_header + message_columns]
    matched = 0
    for row in survey_data:
        # Ragged rows happen when trailing cells were empty; pad them out.
        padded = row + [""] * (len(survey_header) - len(row))
        pid = padded[key_index].strip()
        transcript = wide.get(pid) if pid else None
        if transcript is not None:
            matched += 1
            out_rows.append(padded + transcript)
        else:
            out_rows.append(padded + empty_transcript)

    unmatched = [pid for pid in wide if pid not in seen_at]
    return MergeResult(
        merged_csv=_write_rows(out_rows),
        matched=matched,
        survey_rows=len(survey_data),
        unmatched=unmatched,
    )
