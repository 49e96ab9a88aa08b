import csv
import io

import pytest

from g4r.cli import build_parser, main


def _write(path, text):
    path.write_text(text, encoding="utf-8", newline="")
    return str(path)


MESSAGES = (
    "participant_id,message_to_gpt,message_from_gpt,timestamp\r\n"
    "ABC,hi,hello,t1\r\n"
    "ABC,more,sure,t2\r\n"
    "LOST,where,gone,t3\r\n"
)
SURVEY = "g4r_pid,Q1\r\nABC,5\r\nXYZ,3\r\n"


def test_parser_knows_all_subcommands():
    parser = build_parser()
    for command in ("serve", "merge", "pivot", "simulate"):
        args = {
            "serve": ["serve"],
            "merge": ["merge", "--messages", "m", "--survey", "s", "--out", "o"],
            "pivot": ["pivot", "--messages", "m", "--out", "o"],
            "simulate": ["simulate", "--scripts", "f", "--base-url", "u"],
        }[command]
        assert parser.parse_args(args).command == command


def test_merge_writes_output_and_reports(tmp_path, capsys):
    messages = _write(tmp_path / "m.csv", MESSAGES)
    survey = _write(tmp_path / "s.csv", SURVEY)
    out = tmp_path / "merged.csv"
    code = main(["merge", "--messages", messages, "--survey", survey, "--out", str(out)])
    assert code == 0
    captured = capsys.readouterr()
    assert "merged 1 of 2" in captured.out
    assert "LOST" in captured.err
    rows = list(csv.reader(io.StringIO(out.read_text(encoding="utf-8"))))
    assert rows[0][:2] == ["g4r_pid", "Q1"]
    assert rows[1][:4] == ["ABC", "5", "hi", "hello"]


def test_merge_writes_unmatched_sidecar_when_asked(tmp_path):
    messages = _write(tmp_path / "m.csv", MESSAGES)
    survey = _write(tmp_path / "s.csv", SURVEY)
    sidecar = tmp_path / "unmatched.txt"
    code = main(
        [
            "merge",
            "--messages", messages,
            "--survey", survey,
            "--out", str(tmp_path / "merged.csv"),
            "--unmatched", str(sidecar),
        ]
    )
    assert code == 0
    assert sidecar.read_text(encoding="utf-8") == "LOST\n"


def test_merge_exits_2_on_bad_survey(tmp_path, capsys):
    messages = _write(tmp_path / "m.csv", MESSAGES)
    survey = _write(tmp_path / "s.csv", "g4r_pid,Q1\r\nDUP,1\r\nDUP,2\r\n")
    code = main(
        [
            "merge",
            "--messages", messages,
            "--survey", survey,
            "--out", str(tmp_path / "merged.csv"),
        ]
    )
    assert code == 2
    assert "duplicate" in capsys.readouterr().err
    assert not (tmp_path / "merged.csv").exists()


def test_merge_exits_2_on_missing_file(tmp_path, capsys):
    code = main(
        [
            "merge",
            "--messages", str(tmp_path / "absent.csv"),
            "--survey", str(tmp_path / "also-absent.csv"),
            "--out", str(tmp_path / "merged.csv"),
        ]
    )
    assert code == 2
    assert "cannot read" in capsys.readouterr().err


def test_merge_skip_rows_flag(tmp_path):
    messages = _write(tmp_path / "m.csv", MESSAGES)
    survey = _write(
        tmp_path / "s.csv",
        "g4r_pid,Q1\r\nquestion text,question text\r\nimport ids,import ids\r\nABC,5\r\n",
    )
    out = tmp_path / "merged.csv"
    code = main(
        [
            "merge",
            "--messages", messages,
            "--survey", survey,
            "--out", str(out),
            "--skip-rows", "2",
        ]
    )
    assert code == 0
    assert "question text" not in out.read_text(encoding="utf-8")


def test_pivot_writes_wide_file(tmp_path, capsys):
    messages = _write(tmp_path / "m.csv", MESSAGES)
    out = tmp_path / "wide.csv"
    assert main(["pivot", "--messages", messages, "--out", str(out)]) == 0
    rows = list(csv.reader(io.StringIO(out.read_text(encoding="utf-8"))))
    assert rows[0] == [
        "participant_id",
        "message_to_gpt_1",
        "message_from_gpt_1",
        "message_to_gpt_2",
        "message_from_gpt_2",
    ]
    assert rows[1] == ["ABC", "hi", "hello", "more", "sure"]
    assert rows[2] == ["LOST", "where", "gone", "", ""]


def test_pivot_exits_2_on_malformed_input(tmp_path):
    bad = _write(tmp_path / "bad.csv", "wrong,columns\r\na,b\r\n")
    assert main(["pivot", "--messages", bad, "--out", str(tmp_path / "w.csv")]) == 2


def test_simulate_runs_against_live_service(tmp_path, live_server, capsys):
    scripts = _write(
        tmp_path / "scripts.csv",
        "participant_id,text\r\nS1,hello\r\nS2,hi there\r\nS1,more\r\n",
    )
    code = main(
        [
            "simulate",
            "--scripts", scripts,
            "--base-url", live_server,
            "--concurrency", "2",
        ]
    )
    captured = capsys.readouterr()
    assert code == 0, captured.err
    assert "participants: 2" in captured.out
    assert "capture verified" in captured.out


def test_simulate_exits_2_on_bad_script_file(tmp_path, capsys):
    bad = _write(tmp_path / "bad.csv", "nope\r\n")
    code = main(["simulate", "--scripts", bad, "--base-url", "http://unused"])
    assert code == 2
