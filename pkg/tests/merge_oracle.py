"""Independent reference implementation of the long-to-wide pivot and the
survey merge, used to cross-check the production code on randomized inputs.

Deliberately built differently from the real module: rows are dicts keyed
by column name, the width comes from a max over per-participant counts,
and serialization goes through csv.DictWriter. Only the observable
contract is shared:

  * wide columns are message_to_gpt_k / message_from_gpt_k, interleaved,
    k from 1 to the longest conversation in the transcript file
  * participants keep first-seen order; survey rows keep file order
  * the merge is a left join on the survey's g4r_pid column; blank keys
    join nothing and may repeat, duplicate non-blank keys are an error
"""

import csv
import io


class OracleMergeError(Exception):
    pass


def _parse_transcripts(messages_csv: str) -> tuple[list[str], dict[str, dict[str, str]]]:
    """Returns (pids in first-seen order, {pid: {column: value}})."""
    reader = csv.DictReader(io.StringIO(messages_csv))
    order: list[str] = []
    cells: dict[str, dict[str, str]] = {}
    counts: dict[str, int] = {}
    for row in reader:
        pid = row["participant_id"]
        if pid not in cells:
            order.append(pid)
            cells[pid] = {}
            counts[pid] = 0
        counts[pid] += 1
        k = counts[pid]
        cells[pid][f"message_to_gpt_{k}"] = row["message_to_gpt"]
        cells[pid][f"message_from_gpt_{k}"] = row["message_from_gpt"]
    return order, cells


def _wide_fieldnames(cells: dict[str, dict[str, str]]) -> list[str]:
    width = 0
    for columns in cells.values():
        width = max(width, len(columns) // 2)
    names = []
    for k in range(1, width + 1):
        names.append(f"message_to_gpt_{k}")
        names.append(f"message_from_gpt_{k}")
    return names


def oracle_pivot(messages_csv: str) -> str:
    order, cells = _parse_transcripts(messages_csv)
    fieldnames = ["participant_id"] + _wide_fieldnames(cells)
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=fieldnames, restval="")
    writer.writeheader()
    for pid in order:
        writer.writerow({"participant_id": pid, **cells[pid]})
    return out.getvalue()


def oracle_merge(messages_csv: str, survey_csv: str, skip_rows: int = 0) -> dict:
    """Returns {"csv": merged text, "matched": n, "unmatched": [pids]}."""
    order, cells = _parse_transcripts(messages_csv)
    wide_names = _wide_fieldnames(cells)

    survey_reader = csv.reader(io.StringIO(survey_csv))
    rows = list(survey_reader)
    if not rows:
        raise OracleMergeError("empty survey")
    header, data = rows[0], rows[1 + skip_rows :]
    data = [row for row in data if row]
    if "g4r_pid" not in header:
        raise OracleMergeError("no g4r_pid column")
    key_at = header.index("g4r_pid")

    keys = []
    for row in data:
        key = row[key_at].strip() if key_at < len(row) else ""
        if key:
            keys.append(key)
    if len(keys) != len(set(keys)):
        raise OracleMergeError("duplicate g4r_pid")

    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(header + wide_names)
    matched = 0
    for row in data:
        padded = row + [""] * (len(header) - len(row))
        key = padded[key_at].strip()
        extra = {}
        if key and key in cells:
            extra = cells[key]
            matched += 1
        writer.writerow(padded + [extra.get(name, "") for name in wide_names])
    unmatched = [pid for pid in order if pid not in keys]
    return {"csv": out.getvalue(), "matched": matched, "unmatched": unmatched}
