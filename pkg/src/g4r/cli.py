"""Command-line entry points.

    g4r serve      run the service
    g4r merge      join a transcript CSV onto a survey export by g4r_pid
    g4r pivot      reshape a transcript CSV from long to wide
    g4r simulate   drive scripted participants against a running service

``merge`` and ``pivot`` work on downloaded files and never touch the
database, so they can run on an analyst's laptop.
"""

import argparse
import sys
from pathlib import Path

from . import export, harness, settings as settings_mod
from .api import create_app


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    settings = settings_mod.from_env()
    overrides = {}
    if args.bind:
        overrides["bind_addr"] = args.bind
    if args.db:
        overrides["db_path"] = args.db
    if args.echo:
        overrides["provider"] = "echo"
        # The echo backend ignores credentials, but interfaces without a
        # key are still refused at send time; give the offline server a
        # stand-in so it works with no configuration at all.
        if settings.default_api_key is None:
            overrides["default_api_key"] = "echo"
    if overrides:
        settings = settings_mod.Settings(
            **{**settings.__dict__, **overrides}
        )
    app = create_app(settings)
    uvicorn.run(app, host=settings.host, port=settings.port, log_level="info")
    return 0


class _CliError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise _CliError(f"cannot read {path}: {err.strerror}")


def _cmd_merge(args: argparse.Namespace) -> int:
    messages_csv = _read(args.messages)
    survey_csv = _read(args.survey)
    try:
        result = export.merge_with_survey(messages_csv, survey_csv, skip_rows=args.skip_rows)
    except export.MergeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    Path(args.out).write_text(result.merged_csv, encoding="utf-8", newline="")
    print(
        f"merged {result.matched} of {result.survey_rows} survey rows"
        f" with transcripts -> {args.out}"
    )
    if result.unmatched:
        print(
            f"warning: {len(result.unmatched)} participant(s) have transcripts"
            " but no survey row:",
            file=sys.stderr,
        )
        for pid in result.unmatched:
            print(f"  {pid}", file=sys.stderr)
        if args.unmatched:
            Path(args.unmatched).write_text(
                "".join(pid + "\n" for pid in result.unmatched), encoding="utf-8"
            )
            print(f"unmatched participant IDs written to {args.unmatched}", file=sys.stderr)
    return 0


def _cmd_pivot(args: argparse.Namespace) -> int:
    messages_csv = _read(args.messages)
    try:
        wide = export.pivot_csv(messages_csv)
    except export.MergeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    Path(args.out).write_text(wide, encoding="utf-8", newline="")
    print(f"wide-format transcripts -> {args.out}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        lines = harness.load_scripts(_read(args.scripts))
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    overrides = {}
    if args.max_messages is not None:
        overrides["max_messages"] = args.max_messages
    if args.api_key is not None:
        overrides["api_key"] = args.api_key
    report = harness.run_scripts(
        args.base_url, lines, concurrency=args.concurrency, interface_overrides=overrides
    )
    print(f"interface: {report.interface_id}")
    print(f"participants: {len(report.outcomes)}")
    sent = sum(len(outcome.replies) for outcome in report.outcomes)
    capped = sum(1 for outcome in report.outcomes if outcome.capped_after is not None)
    print(f"messages accepted: {sent}; participants capped: {capped}")
    for outcome in report.outcomes:
        for error in outcome.errors:
            print(f"error [{outcome.participant_id}]: {error}", file=sys.stderr)
    if report.discrepancies:
        print("capture discrepancies:", file=sys.stderr)
        for line in report.discrepancies:
            print(f"  {line}", file=sys.stderr)
    if report.ok:
        print("capture verified: transcripts match the scripts")
        return 0
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="g4r",
        description="Parameterized chat interfaces for survey-based studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the service")
    serve.add_argument("--bind", help="host:port to listen on (default from G4R_BIND_ADDR)")
    serve.add_argument("--db", help="SQLite database path (default from G4R_DB_PATH)")
    serve.add_argument(
        "--echo",
        action="store_true",
        help="use the offline echo backend instead of a real chat API",
    )
    serve.set_defaults(func=_cmd_serve)

    merge = sub.add_parser(
        "merge", help="join transcripts onto a survey export by g4r_pid"
    )
    merge.add_argument("--messages", required=True, help="downloaded transcript CSV")
    merge.add_argument("--survey", required=True, help="survey export CSV")
    merge.add_argument("--out", required=True, help="merged CSV to write")
    merge.add_argument(
        "--unmatched",
        help="also write transcript-only participant IDs to this file",
    )
    merge.add_argument(
        "--skip-rows",
        type=int,
        default=0,
        help="descriptive rows under the survey header to skip (Qualtrics exports: 2)",
    )
    merge.set_defaults(func=_cmd_merge)

    pivot = sub.add_parser("pivot", help="reshape a transcript CSV from long to wide")
    pivot.add_argument("--messages", required=True, help="downloaded transcript CSV")
    pivot.add_argument("--out", required=True, help="wide CSV to write")
    pivot.set_defaults(func=_cmd_pivot)

    simulate = sub.add_parser(
        "simulate", help="drive scripted participants against a running service"
    )
    simulate.add_argument(
        "--scripts", required=True, help="CSV of participant_id,text rows"
    )
    simulate.add_argument("--base-url", required=True, help="service URL, e.g. http://127.0.0.1:8000")
    simulate.add_argument("--concurrency", type=int, default=10)
    simulate.add_argument(
        "--max-messages", type=int, help="message cap for the throwaway interface"
    )
    simulate.add_argument(
        "--api-key", help="chat API key for the throwaway interface"
    )
    simulate.set_defaults(func=_cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
