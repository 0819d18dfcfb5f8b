"""darkrsp command line: run, validate, suite, list-fixtures."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .scenario import (
    ScenarioError,
    emit_report,
    list_fixtures,
    fixture_path,
    parse_scenario,
    render_report,
    resolve_scenario_path,
    run_scenario,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
_SUFFIX = {"json": "json", "csv": "csv", "text": "txt"}


def _print_problems(err: ScenarioError) -> None:
    for index, msg in err.problems:
        where = f"entry {index}" if index is not None else "scenario"
        print(f"error: {where}: {msg}", file=sys.stderr)


def _load(ref: str, seed=None, trials=None):
    return parse_scenario(resolve_scenario_path(ref), seed=seed, trials=trials)


def cmd_run(args) -> int:
    cfg = _load(args.scenario, args.seed, args.trials)
    fmt = args.format or cfg.output_format
    out = args.out or cfg.output_path
    report = run_scenario(cfg, jobs=args.jobs)
    if out:
        emit_report(report, fmt, out)
        print(f"{cfg.name}: {'pass' if report.passed else 'FAIL'} -> {out}", file=sys.stderr)
    else:
        sys.stdout.write(render_report(report, fmt))
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_validate(args) -> int:
    cfg = _load(args.scenario)
    runs = sum(len(e.configs) for e in cfg.entries)
    print(f"{cfg.name}: {len(cfg.entries)} entries, {runs} protocol runs, valid")
    return EXIT_OK


def cmd_suite(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    # every fixture validates before any runs
    configs = [(name, parse_scenario(fixture_path(name), args.seed, args.trials)) for name in list_fixtures()]
    ok = True
    for name, cfg in configs:
        report = run_scenario(cfg, jobs=args.jobs)
        emit_report(report, args.format, out_dir / f"{name}.{_SUFFIX[args.format]}")
        print(f"{name:<20} {'pass' if report.passed else 'FAIL'}")
        ok &= report.passed
    return EXIT_OK if ok else EXIT_FAILED


def cmd_list(args) -> int:
    for name in list_fixtures():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="darkrsp", description="Remote state preparation over dark states.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or bundled fixture")
    run.add_argument("scenario", help="scenario path or bundled fixture name")
    run.add_argument("--format", choices=["json", "csv", "text"])
    run.add_argument("--out", help="report path (default: stdout)")
    run.add_argument("--seed", type=int, help="override every seed in the scenario")
    run.add_argument("--trials", type=int, help="override sampling trial counts")
    run.add_argument("--jobs", type=int, default=1, help="entries run concurrently")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a scenario without running it")
    val.add_argument("scenario")
    val.set_defaults(func=cmd_validate)

    suite = sub.add_parser("suite", help="run every bundled fixture, one report per fixture")
    suite.add_argument("--out", required=True, help="output directory")
    suite.add_argument("--format", choices=["json", "csv", "text"], default="json")
    suite.add_argument("--seed", type=int)
    suite.add_argument("--trials", type=int)
    suite.add_argument("--jobs", type=int, default=1)
    suite.set_defaults(func=cmd_suite)

    lst = sub.add_parser("list-fixtures", help="list bundled scenario fixtures")
    lst.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as err:
        _print_problems(err)
        return EXIT_USAGE
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
