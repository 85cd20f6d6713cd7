"""Command-line entry points: ``run``, ``replay`` and ``report``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .campaign import OUT_DIR_ENV, CampaignConfig, load_config, replay, rerender_report, run_campaign


def _run(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else CampaignConfig()
    if args.out:
        config = replace(config, out_dir=args.out)
    report = run_campaign(config)
    totals = report["totals"]
    print(f"wrote {config.output_dir / 'report.json'}")
    print(f"unique bugs {totals['unique_bugs']} (crashes {totals['crashes']}, nans {totals['nans']}, "
          f"heavy inconsistencies {totals['heavy_inconsistencies']})")
    print(f"temperature-sensitive coverage {report['coverage']['temperature_sensitive']:.0%}")
    return 0


def _replay(args: argparse.Namespace) -> int:
    try:
        result = replay(args.case, args.out)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    summary = {
        "case": args.case,
        "verdict": result.verdict.kind,
        "mae": result.verdict.mae,
        "duplicate": result.verdict.duplicate,
        "reference_status": result.ref.status,
        "degraded_status": result.deg.status,
        "normalized_log": list(result.verdict.normalized_log),
        "checksum_ok": result.checksum_ok,
        "matches_log": result.matches_log,
        "notes": result.notes,
    }
    print(json.dumps(summary, indent=2))
    return 0 if result.checksum_ok and result.matches_log else 1


def _report(args: argparse.Namespace) -> int:
    report = rerender_report(args.out)
    print(json.dumps(report["totals"], indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermofuzz", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a fuzzing campaign")
    run.add_argument("--config", type=Path, help="campaign config JSON (defaults if omitted)")
    run.add_argument("--out", help=f"output directory (overridden by ${OUT_DIR_ENV})")
    run.set_defaults(func=_run)

    rep = sub.add_parser("replay", help="re-execute one logged case")
    rep.add_argument("--case", required=True, help="case id such as s1-i00042")
    rep.add_argument("--out", required=True, type=Path, help="campaign output directory")
    rep.set_defaults(func=_replay)

    rpt = sub.add_parser("report", help="re-render report.json from the event log")
    rpt.add_argument("--out", required=True, type=Path, help="campaign output directory")
    rpt.set_defaults(func=_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
