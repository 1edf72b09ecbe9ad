"""Command-line entry point for scenario runs, validation, and diffing.

Exit codes: 0 the run completed, 2 the run halted, 3 the scenario failed
validation, 4 an internal integrity check tripped.
"""

from __future__ import annotations

import argparse
import sys

from .diff import run_diff
from .errors import EngineError, IntegrityError, SchemaError
from .oracle import MODE_FREE_RIDE
from .orchestrator import replay, run_rebalance
from .reports import full_report
from .scenario import (ENGINE_VERSION, Scenario, dump_snapshot, ingest,
                       load_snapshot)

EXIT_OK = 0
EXIT_HALTED = 2
EXIT_SCHEMA = 3
EXIT_INTEGRITY = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundengine",
        description="Deterministic rebalance engine for tokenized funds.")
    parser.add_argument("--version", action="version", version=ENGINE_VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="replay a scenario file")
    run_p.add_argument("scenario")
    run_p.add_argument("--machine", action="store_true",
                       help="pipe-delimited tables instead of aligned text")
    run_p.add_argument("--exact-dilution", action="store_true",
                       help="solve fee mints for exact post-dilution value")
    run_p.add_argument("--snapshot-out", metavar="PATH",
                       help="write the final state snapshot here")

    val_p = sub.add_parser("validate", help="schema-check a scenario file")
    val_p.add_argument("scenario")

    diff_p = sub.add_parser("diff", help="compare a scheme run to the per-lot calculator")
    diff_p.add_argument("scenario")
    diff_p.add_argument("--machine", action="store_true")

    res_p = sub.add_parser("resume", help="re-run a scenario from a saved snapshot")
    res_p.add_argument("snapshot")
    res_p.add_argument("scenario", help="scenario whose events replace the halted run")
    res_p.add_argument("--machine", action="store_true")
    res_p.add_argument("--exact-dilution", action="store_true")
    res_p.add_argument("--snapshot-out", metavar="PATH")
    return parser


def _run_scenario(scenario: Scenario, args, initial=None) -> int:
    state = initial if initial is not None else scenario.initial_state
    final, reports = replay(state, scenario.events, scenario.config.scheme,
                            exact_dilution=getattr(args, "exact_dilution", False),
                            carry_unfilled=scenario.config.carry_unfilled)
    sys.stdout.write(full_report(reports, final, scenario.source_hash,
                                 ENGINE_VERSION, delimited=args.machine))
    if getattr(args, "snapshot_out", None):
        with open(args.snapshot_out, "w", encoding="utf-8") as fh:
            fh.write(dump_snapshot(final))
    if reports and reports[-1].halt is not None:
        sys.stdout.write(f"halted: {reports[-1].halt}\n")
        return EXIT_HALTED
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            ingest(args.scenario)
            sys.stdout.write("ok\n")
            return EXIT_OK
        if args.command == "run":
            return _run_scenario(ingest(args.scenario), args)
        if args.command == "resume":
            with open(args.snapshot, "r", encoding="utf-8") as fh:
                state = load_snapshot(fh.read())
            return _run_scenario(ingest(args.scenario), args, initial=state)
        if args.command == "diff":
            scenario = ingest(args.scenario)
            ratio = scenario.config.fee_schedule.hwm_liability_ratio
            result = run_diff(scenario.initial_state, scenario.events,
                              scenario.config.scheme,
                              oracle_mode=scenario.config.oracle_mode,
                              hwml_ratio=ratio)
            sep = "|" if args.machine else "  "
            sys.stdout.write(sep.join(
                ["event", "engine_fee_usd", "lot_fee_usd", "classification"]) + "\n")
            for d in result.per_event:
                sys.stdout.write(sep.join(
                    [str(d.event_index), str(d.engine_fee_usd),
                     str(d.oracle_fee_usd), d.classification]) + "\n")
            sys.stdout.write(
                f"totals{sep}{result.engine_total_usd}{sep}"
                f"{result.oracle_total_usd}{sep}"
                f"{'match' if result.all_matched else 'divergent'}\n")
            if result.halted_at is not None:
                sys.stdout.write(f"halted at event {result.halted_at}\n")
                return EXIT_HALTED
            return EXIT_OK
        raise SchemaError(f"unknown command: {args.command}")
    except SchemaError as exc:
        for message in exc.messages:
            sys.stderr.write(f"schema error: {message}\n")
        return EXIT_SCHEMA
    except IntegrityError as exc:
        sys.stderr.write(f"integrity violation: {exc}\n")
        return EXIT_INTEGRITY
    except EngineError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INTEGRITY
    except OSError as exc:
        sys.stderr.write(f"io error: {exc}\n")
        return EXIT_SCHEMA


if __name__ == "__main__":
    raise SystemExit(main())
