"""Command-line entry point (``ata``).

Exit codes: 0 success, 2 usage or input error, 3 analysis error (dependency
cycle, inconsistent ground truth, critical trace issue).
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import logging
import os
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

from ata import __version__
from ata.analytics import compute_summary, extract_failures, final_output
from ata.bench import (
    DEFAULT_REL_TOL,
    evaluate_candidate,
    list_candidates,
    load_benchmark,
    load_candidate,
    run_engine_as_candidate,
)
from ata.errors import (
    AtaError,
    CycleDetectedError,
    InconsistentGroundTruthError,
    MissingDependencyError,
)
from ata.flow import discover_task_flow, flow_to_dot, write_flow_file
from ata.ged import DEFAULT_BUDGET
from ata.ingest import has_critical, load_trace_file, validate_trace
from ata.tracegen.suite import CENSUS_KEYS, DEFAULT_SEED, SuiteConfig, census, generate_suite
from ata.variability import RunRecord, VariabilityRunSet, run_variability

EXIT_OK, EXIT_USAGE, EXIT_ANALYSIS = 0, 2, 3
_ANALYSIS_ERRORS = (CycleDetectedError, MissingDependencyError, InconsistentGroundTruthError)

log = logging.getLogger("ata")


class _Fail(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") or not text else text + "\n")


# commands -------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    lines = []
    critical = False
    for path in args.paths:
        ts = load_trace_file(path)
        for w in ts.parse_warnings:
            lines.append(f"{path}: {w.severity.value} {w.code} {w.location}: {w.message}")
        for trace_id in sorted(ts.traces):
            issues = validate_trace(ts.traces[trace_id], args.skew_tolerance)
            critical = critical or has_critical(issues)
            for i in issues:
                lines.append(f"{path}: {i.severity.value} {i.code} {i.location}: {i.message}")
    report = "".join(line + "\n" for line in lines)
    if args.out is not None:
        _write(Path(args.out), "ingest_report.txt", report)
    _emit(report)
    return EXIT_ANALYSIS if critical else EXIT_OK


def cmd_flow(args: argparse.Namespace) -> int:
    trace = load_trace_file(args.path).primary()
    flow = discover_task_flow(trace)
    want_dot = args.dot or args.format == "dot"
    want_flow = args.flow_file or not want_dot
    out = Path(args.out) if args.out is not None else Path(".")
    stem = Path(args.path).stem
    written = []
    if want_flow:
        written.append(_write(out, f"{stem}.flow", write_flow_file(flow)))
    if want_dot:
        written.append(_write(out, f"{stem}.dot", flow_to_dot(flow)))
    if args.format == "dot":
        _emit(flow_to_dot(flow))
    else:
        for node in flow.walk():
            depth = 0
            cur = node.parent
            while cur is not None:
                depth += 1
                cur = flow.nodes[cur].parent
            deps = f" after {', '.join(node.depends_on)}" if node.depends_on else ""
            _emit(f"{'  ' * depth}{node.task_id} [{node.label}] {node.status.value}{deps}")
        for path in written:
            _emit(f"wrote {path}")
    return EXIT_OK


def _parse_decimal(text: str, what: str) -> Decimal:
    try:
        return Decimal(text)
    except InvalidOperation:
        raise _Fail(EXIT_USAGE, f"{what} must be a number, got {text!r}") from None


def cmd_variability(args: argparse.Namespace) -> int:
    paths: list[str] = []
    for pattern in args.logs:
        matched = sorted(glob.glob(pattern))
        paths.extend(matched if matched else [pattern])
    paths = list(dict.fromkeys(paths))
    if len(paths) < 2:
        raise _Fail(EXIT_USAGE, f"variability needs at least two run logs, got {len(paths)}")
    expected = _parse_decimal(args.expected, "--expected")
    runs = []
    for path in paths:
        trace = load_trace_file(path).primary()
        flow = discover_task_flow(trace)
        summary = compute_summary(trace, flow, extract_failures(trace), Path(path).stem)
        runs.append(RunRecord(flow, summary, final_output(trace, flow)))
    penalty = float(args.penalty) if args.penalty is not None else None
    report = run_variability(VariabilityRunSet(tuple(runs), expected), budget=args.ged_budget, penalty=penalty)
    if args.out is not None:
        out = Path(args.out)
        _write(out, "variability.json", report.to_json())
        _write(out, "variability.csv", report.to_csv(args.label))
    if args.format == "csv":
        _emit(report.to_csv(args.label))
    elif args.format == "json":
        _emit(report.to_json())
    else:

        def pct(r) -> str:
            return "undefined" if r.value is None else f"{r.value:.2f}%"

        _emit(
            f"runs: {report.n}\n"
            f"accuracy CV: {pct(report.cv_accuracy)}\n"
            f"cost CV: {pct(report.cv_cost)}\n"
            f"execution time CV: {pct(report.cv_time)}\n"
            f"LLM calls CV: {pct(report.cv_llm_calls)}\n"
            f"flow variability (mean pairwise GED): {report.flow_variability:.4f}\n"
            f"MSE: {report.mse:.6g}"
        )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cases = load_benchmark(args.dir)
    if args.self_candidate:
        name = "self"
        outputs = run_engine_as_candidate(cases)
    else:
        name = args.candidate
        if name not in list_candidates(args.dir):
            known = ", ".join(list_candidates(args.dir)) or "none"
            raise _Fail(EXIT_USAGE, f"unknown candidate {name!r} (available: {known})")
        outputs = load_candidate(args.dir, name)
    report = evaluate_candidate(cases, outputs, budget=args.ged_budget, rel_tol=args.tolerance, name=name)
    if args.out is not None:
        out = Path(args.out)
        _write(out, f"eval_{name}.json", report.to_json())
        _write(out, f"eval_{name}.csv", report.to_csv())
        _write(out, f"eval_{name}.txt", report.to_text())
    if args.format == "csv":
        _emit(report.to_csv())
    elif args.format == "json":
        _emit(report.to_json())
    else:
        _emit(report.to_text())
    return EXIT_OK


def _config(args: argparse.Namespace) -> SuiteConfig:
    return SuiteConfig.load(args.config) if args.config else SuiteConfig()


def _census_text(counts: dict[str, int]) -> str:
    return "".join(f"{k}: {counts[k]}\n" for k in CENSUS_KEYS)


def cmd_gen(args: argparse.Namespace) -> int:
    if args.out is None:
        raise _Fail(EXIT_USAGE, "gen needs --out DIR")
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    suite = generate_suite(_config(args), seed, args.out)
    _emit(f"wrote {len(suite.cases)} cases to {args.out} (seed {seed})")
    _emit(_census_text(census(suite.cases)))
    return EXIT_OK


def _census_from_dir(directory: Path) -> dict[str, int]:
    path = directory / "cases.csv"
    if not path.exists():
        raise _Fail(EXIT_USAGE, f"missing file: {path}")
    rows = list(csv.DictReader(io.StringIO(path.read_text(encoding="utf-8"))))
    tags = [set(r["tags"].split(";")) for r in rows]

    def count(tag: str) -> int:
        return sum(1 for t in tags if tag in t)

    return {
        "cases": len(rows),
        "numerical": count("numerical"),
        "natural_language": count("natural_language"),
        "distributed": count("distributed"),
        "syntax_errors": count("syntax_error"),
        "correct": count("correct"),
        "incorrect": count("incorrect"),
        "happy_paths": count("happy_path"),
    }


def cmd_census(args: argparse.Namespace) -> int:
    if args.dir is not None:
        counts = _census_from_dir(Path(args.dir))
    else:
        seed = args.seed if args.seed is not None else DEFAULT_SEED
        counts = census(generate_suite(_config(args), seed).cases)
    if args.format == "json":
        _emit(json.dumps(counts, indent=2))
    else:
        _emit(_census_text(counts))
    return EXIT_OK


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="directory for written artifacts")
    common.add_argument("--format", choices=("text", "csv", "json", "dot"), default="text", help="stdout format")
    common.add_argument("--ged-budget", type=int, default=DEFAULT_BUDGET, help="largest graph size solved exactly")
    common.add_argument("--seed", type=int, help=f"generator seed (default {DEFAULT_SEED})")
    common.add_argument("--tolerance", type=float, default=DEFAULT_REL_TOL, help="relative tolerance for time and cost")

    parser = argparse.ArgumentParser(prog="ata", description="Trace analytics and benchmark harness for agentic systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[common], help="validate trace logs")
    p.add_argument("paths", nargs="+")
    p.add_argument("--skew-tolerance", type=int, default=1_000_000, help="clock-skew tolerance in ns")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("flow", parents=[common], help="discover the task flow of a log")
    p.add_argument("path")
    p.add_argument("--dot", action="store_true", help="write a Graphviz .dot file")
    p.add_argument("--flow-file", action="store_true", help="write a .flow file (default when --dot is absent)")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("variability", parents=[common], help="cross-run variability of repeated runs")
    p.add_argument("logs", nargs="+", help="run logs or glob patterns")
    p.add_argument("--expected", required=True, help="expected final output")
    p.add_argument("--penalty", help="squared-error charge for a run without output (default expected^2)")
    p.add_argument("--label", default="runset", help="dataset label in the CSV report")
    p.set_defaults(func=cmd_variability)

    p = sub.add_parser("bench", parents=[common], help="score a candidate against ground truth")
    p.add_argument("dir")
    who = p.add_mutually_exclusive_group(required=True)
    who.add_argument("--candidate", help="name of a directory under candidates/")
    who.add_argument("--self", dest="self_candidate", action="store_true", help="run this engine as the candidate")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", parents=[common], help="generate a benchmark suite")
    p.add_argument("--config", help="JSON suite config (defaults reproduce the reference composition)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("census", parents=[common], help="print suite composition counts")
    p.add_argument("dir", nargs="?", help="existing suite directory (otherwise generate in memory)")
    p.add_argument("--config", help="JSON suite config")
    p.set_defaults(func=cmd_census)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("ATA_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except _ANALYSIS_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (AtaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
