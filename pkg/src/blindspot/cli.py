"""Command-line driver: run, blindspots, validate, oracle, report.

Exit codes: 0 success, 1 a validated blind spot was wrong, 2 usage error
(bad flags, unreadable or missing files), 3 runtime or format error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional

from . import analyzer, reporter, trace_format, validator
from .interpreter import (
    CF_POLICIES,
    DEFAULT_STEP_LIMIT,
    ConfigError,
    ParseError,
    Program,
    RunConfig,
    parse_program,
    run,
)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_ERROR = 3


class UsageError(Exception):
    pass


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_program(path: str) -> Program:
    return parse_program(_read_bytes(path).decode("utf-8"))


def _load_inputs(specs: List[str]) -> Dict[str, bytes]:
    inputs: Dict[str, bytes] = {}
    for spec in specs or []:
        name, sep, path = spec.partition("=")
        if not sep or not name:
            raise UsageError(f"--input expects NAME=FILE, got {spec!r}")
        if name in inputs:
            raise UsageError(f"input source {name!r} bound twice")
        inputs[name] = _read_bytes(path)
    return inputs


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if not getattr(args, n)]
    if missing:
        raise UsageError(f"{args.command} requires {', '.join(missing)}")


def cmd_run(args: argparse.Namespace) -> int:
    _require(args, "program", "trace")
    program = _load_program(args.program)
    inputs = _load_inputs(args.input)
    trace, output = run(program, RunConfig(inputs, args.cf_policy, args.step_limit))
    trace_format.write_trace(trace, args.trace)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(output)
    print(f"status: {trace.status.value}" + (f" ({trace.error})" if trace.error else ""))
    print(f"labels: {len(trace.labels)}")
    print(f"bytes read: {sum(len(r) for r in trace.read_sets)} of {sum(s.length for s in trace.sources)}")
    print(f"output bytes: {len(output)}")
    return EXIT_OK


def cmd_blindspots(args: argparse.Namespace) -> int:
    _require(args, "trace")
    if not os.path.exists(args.trace):
        raise UsageError(f"no such trace file: {args.trace}")
    report = analyzer.blind_spots(trace_format.read_trace(args.trace))
    text = analyzer.report_json(report) if args.format == "json" else report.to_csv()
    _emit(text, args.out)
    return EXIT_OK


def _report_for(args: argparse.Namespace, program: Program,
                inputs: Dict[str, bytes]) -> analyzer.BlindSpotReport:
    if args.report:
        doc = json.loads(_read_bytes(args.report).decode("utf-8"))
        return analyzer.BlindSpotReport.from_json(doc)
    if args.trace:
        if not os.path.exists(args.trace):
            raise UsageError(f"no such trace file: {args.trace}")
        return analyzer.blind_spots(trace_format.read_trace(args.trace))
    trace, _ = run(program, RunConfig(inputs, args.cf_policy, args.step_limit))
    return analyzer.blind_spots(trace)


def cmd_validate(args: argparse.Namespace) -> int:
    _require(args, "program", "input")
    program = _load_program(args.program)
    inputs = _load_inputs(args.input)
    report = _report_for(args, program, inputs)
    result = validator.validate(program, inputs, report, mode=args.mode, seed=args.seed,
                                samples=args.samples, outside=args.outside,
                                step_limit=args.step_limit)
    _emit(result.dumps(), args.out)
    for source, offset, value in result.type1_violations:
        print(f"type I violation: {source}[{offset}] mutated to {value} changed the run",
              file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_oracle(args: argparse.Namespace) -> int:
    _require(args, "program", "input")
    program = _load_program(args.program)
    inputs = _load_inputs(args.input)
    found = validator.oracle_blind_spots(program, inputs, budget=args.budget,
                                         step_limit=args.step_limit)
    names = list(inputs)
    merged = analyzer.merge_ranges(found)
    doc = {
        "sources": [{"name": n, "length": len(inputs[n])} for n in names],
        "ranges": {n: [list(r) for r in merged.get(i, [])] for i, n in enumerate(names)},
        "total": len(found),
    }
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    _require(args, "dir", "out")
    if not os.path.isdir(args.dir):
        raise UsageError(f"not a directory: {args.dir}")
    entries = []
    for fname in sorted(os.listdir(args.dir)):
        if not fname.endswith(".json"):
            continue
        data_path = os.path.join(args.dir, fname[:-len(".json")])
        if not os.path.isfile(data_path):
            continue
        doc = json.loads(_read_bytes(os.path.join(args.dir, fname)).decode("utf-8"))
        entries.append((_read_bytes(data_path), analyzer.BlindSpotReport.from_json(doc)))
    stats = reporter.corpus_stats(entries)
    paths = reporter.emit_csv(stats, args.out)
    summary_path = os.path.join(args.out, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(reporter.summary_json(stats, args.top))
    print(f"{len(entries)} inputs, {stats.ranges} blind ranges, {stats.blind_bytes} blind bytes")
    for path in paths + [summary_path]:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blindspot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--program", help="program source (.spl)")
        p.add_argument("--input", action="append", metavar="NAME=FILE",
                       help="bind an input source to a file (repeatable)")
        p.add_argument("--trace", help=".bspt trace file")
        p.add_argument("--out", help="output path")
        p.add_argument("--cf-policy", choices=CF_POLICIES, default="accumulate")
        p.add_argument("--step-limit", type=int, default=DEFAULT_STEP_LIMIT)

    p = sub.add_parser("run", help="execute a program and write a trace")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("blindspots", help="enumerate blind spots from a trace")
    common(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_blindspots)

    p = sub.add_parser("validate", help="mutation-test a blind-spot report")
    common(p)
    p.add_argument("--report", help="blind-spot report JSON (default: derive from --trace or a fresh run)")
    p.add_argument("--mode", choices=validator.MODES, default="exhaustive")
    p.add_argument("--samples", type=int, default=validator.DEFAULT_SAMPLES)
    p.add_argument("--outside", type=int, default=validator.DEFAULT_OUTSIDE,
                   help="how many bytes outside blind spots to sample")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="exhaustive single-byte mutation ground truth")
    common(p)
    p.add_argument("--budget", type=int, default=validator.DEFAULT_ORACLE_BUDGET)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="corpus statistics from (input, report) pairs")
    p.add_argument("--dir", help="directory holding FILE and FILE.json report pairs")
    p.add_argument("--out", help="directory for CSV and summary output")
    p.add_argument("--top", type=int, default=20)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if getattr(args, "step_limit", 1) <= 0:
            raise UsageError("--step-limit must be positive")
        return args.func(args)
    except UsageError as exc:
        print(f"blindspot: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, trace_format.FormatError, ConfigError,
            validator.ValidationConfigError, reporter.ReportConfigError,
            UnicodeDecodeError, json.JSONDecodeError, KeyError, OSError) as exc:
        print(f"blindspot: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
