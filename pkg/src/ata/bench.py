"""Benchmark harness: load a suite directory, run or load candidates, score them.

Directory layout::

    cases.csv                      case_id,input,tags,expected_output,final_output
    logs/<id>.log                  trace log
    gt/summary.csv                 one summary row per case
    gt/flows/<id>.flow             ground-truth task flow
    gt/failures/<id>.failures      ground-truth failure list
    candidates/<name>/...          same shape as gt/
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

from ata.analytics import (
    FailureRecord,
    SummaryRow,
    analyze_failures,
    compute_summary,
    final_output,
    parse_failures,
    read_summary_csv,
    write_failures,
    write_summary_csv,
)
from ata.errors import (
    BenchmarkError,
    FlowError,
    IngestError,
    InconsistentGroundTruthError,
    MalformedFlowFileError,
    MissingFileError,
    UnknownCaseError,
)
from ata.flow import EMPTY_FLOW, TaskFlowGraph, discover_task_flow, parse_flow_file, write_flow_file
from ata.ged import DEFAULT_BUDGET, GedCostModel, graph_edit_distance
from ata.ingest import load_trace_file
from ata.model import FailureCategory

log = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-6

_EXACT_FIELDS = ("input_tokens", "output_tokens", "llm_calls", "tool_calls", "task_count")
_CONTINUOUS_FIELDS = ("execution_time_ns", "cost_usd")


@dataclass(frozen=True)
class BenchCase:
    case_id: str
    input: str
    final_output: Decimal | None
    log_path: Path
    gt_flow: TaskFlowGraph
    gt_summary: SummaryRow
    gt_failures: tuple[FailureRecord, ...]
    tags: frozenset[str] = frozenset()
    expected: Decimal | None = None


@dataclass(frozen=True)
class CandidateOutput:
    case_id: str
    summary: SummaryRow
    flow: TaskFlowGraph | None = None
    failures: tuple[FailureRecord, ...] = ()
    output: Decimal | None = None


@dataclass(frozen=True)
class SummaryComparison:
    match: bool
    diffs: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.match


@dataclass(frozen=True)
class CaseScore:
    case_id: str
    summary_match: bool
    flow_ged: float | None
    failure_similarity: float
    diffs: tuple[str, ...] = ()
    has_output: bool = True


@dataclass(frozen=True)
class EvalReport:
    per_case: tuple[CaseScore, ...]
    candidate: str = "candidate"
    notes: tuple[str, ...] = field(default=(), compare=False)

    @property
    def matches(self) -> int:
        return sum(1 for c in self.per_case if c.summary_match)

    @property
    def summary_match_fraction(self) -> float:
        return self.matches / len(self.per_case) if self.per_case else 0.0

    @property
    def mean_flow_ged(self) -> float | None:
        """Mean over cases with a candidate flow; ``None`` when no case has one."""
        geds = [c.flow_ged for c in self.per_case if c.flow_ged is not None]
        return math.fsum(geds) / len(geds) if geds else None

    @property
    def mean_failure_similarity(self) -> float:
        if not self.per_case:
            return 0.0
        return math.fsum(c.failure_similarity for c in self.per_case) / len(self.per_case)

    def to_dict(self) -> dict:
        return {
            "candidate": self.candidate,
            "cases": len(self.per_case),
            "summary_matches": self.matches,
            "summary_match_fraction": self.summary_match_fraction,
            "mean_flow_ged": self.mean_flow_ged,
            "mean_failure_similarity": self.mean_failure_similarity,
            "per_case": [
                {
                    "case_id": c.case_id,
                    "summary_match": c.summary_match,
                    "flow_ged": c.flow_ged,
                    "failure_similarity": c.failure_similarity,
                    "diffs": list(c.diffs),
                }
                for c in self.per_case
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case_id", "summary_match", "flow_ged", "failure_similarity", "diffs"])
        for c in self.per_case:
            ged = "" if c.flow_ged is None else f"{c.flow_ged:g}"
            w.writerow([c.case_id, "true" if c.summary_match else "false", ged, f"{c.failure_similarity:.6f}", ";".join(c.diffs)])
        return buf.getvalue()

    def to_text(self) -> str:
        ged = "n/a" if self.mean_flow_ged is None else f"{self.mean_flow_ged:.4f}"
        lines = [
            f"candidate: {self.candidate}",
            f"summary match: {self.matches}/{len(self.per_case)} = {self.summary_match_fraction:.2f}",
            f"mean flow GED: {ged}",
            f"mean failure-list similarity: {self.mean_failure_similarity:.4f}",
        ]
        misses = [c for c in self.per_case if not c.summary_match]
        if misses:
            lines.append("mismatched cases:")
            for c in misses:
                why = ", ".join(c.diffs) if c.diffs else "no output"
                lines.append(f"  {c.case_id}: {why}")
        return "\n".join(lines) + "\n"


# loading --------------------------------------------------------------------


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFileError(f"missing file: {path}") from None


def _decimal_or_none(text: str) -> Decimal | None:
    text = text.strip()
    if not text:
        return None
    try:
        return Decimal(text)
    except InvalidOperation:
        return None


def _check_consistency(case_id: str, summary: SummaryRow, failures: Sequence[FailureRecord], flow: TaskFlowGraph) -> None:
    cats = Counter(f.category for f in failures)
    sevs = Counter(f.severity for f in failures)
    for c, n in summary.failures_by_category.items():
        if cats.get(c, 0) != n:
            raise InconsistentGroundTruthError(
                f"{case_id}: summary counts {n} {c.value} failure(s), failure list has {cats.get(c, 0)}"
            )
    for s, n in summary.failures_by_severity.items():
        if sevs.get(s, 0) != n:
            raise InconsistentGroundTruthError(f"{case_id}: summary counts {n} {s.value} failure(s), failure list has {sevs.get(s, 0)}")
    if summary.task_count != len(flow):
        raise InconsistentGroundTruthError(f"{case_id}: summary task_count {summary.task_count} but flow has {len(flow)} tasks")


def load_benchmark(directory: str | Path) -> list[BenchCase]:
    """Load every case of a benchmark directory and cross-check its ground truth.

    Raises:
        MissingFileError: a required file is absent.
        InconsistentGroundTruthError: summary counts disagree with the failure
            list or the flow.
    """
    root = Path(directory)
    rows = list(csv.DictReader(io.StringIO(_read(root / "cases.csv"))))
    try:
        summaries = {s.case_id: s for s in read_summary_csv(_read(root / "gt" / "summary.csv"))}
    except ValueError as exc:
        raise InconsistentGroundTruthError(str(exc)) from None
    cases = []
    for row in rows:
        case_id = row["case_id"]
        if case_id not in summaries:
            raise InconsistentGroundTruthError(f"{case_id}: no row in gt/summary.csv")
        log_path = root / "logs" / f"{case_id}.log"
        if not log_path.exists():
            raise MissingFileError(f"missing file: {log_path}")
        flow = parse_flow_file(_read(root / "gt" / "flows" / f"{case_id}.flow"))
        try:
            failures = tuple(parse_failures(_read(root / "gt" / "failures" / f"{case_id}.failures")))
        except ValueError as exc:
            raise InconsistentGroundTruthError(f"{case_id}: {exc}") from None
        _check_consistency(case_id, summaries[case_id], failures, flow)
        cases.append(
            BenchCase(
                case_id=case_id,
                input=row.get("input", ""),
                final_output=_decimal_or_none(row.get("final_output", "")),
                log_path=log_path,
                gt_flow=flow,
                gt_summary=summaries[case_id],
                gt_failures=failures,
                tags=frozenset(t for t in row.get("tags", "").split(";") if t),
                expected=_decimal_or_none(row.get("expected_output", "")),
            )
        )
    return cases


def list_candidates(directory: str | Path) -> list[str]:
    base = Path(directory) / "candidates"
    return sorted(p.name for p in base.iterdir() if p.is_dir()) if base.is_dir() else []


def load_candidate(directory: str | Path, name: str) -> list[CandidateOutput]:
    """Read ``candidates/<name>``; absent flow or failure files count as missing artifacts."""
    base = Path(directory) / "candidates" / name
    if not base.is_dir():
        raise MissingFileError(f"no candidate named {name!r} under {Path(directory) / 'candidates'}")
    try:
        summaries = read_summary_csv(_read(base / "summary.csv"))
    except ValueError as exc:
        raise BenchmarkError(f"candidate {name!r}: {exc}") from None
    out = []
    for s in summaries:
        flow_path = base / "flows" / f"{s.case_id}.flow"
        fail_path = base / "failures" / f"{s.case_id}.failures"
        flow = None
        if flow_path.exists():
            try:
                flow = parse_flow_file(flow_path.read_text(encoding="utf-8"))
            except MalformedFlowFileError as exc:
                log.warning("candidate %s: unreadable flow for %s: %s", name, s.case_id, exc)
        failures: tuple[FailureRecord, ...] = ()
        if fail_path.exists():
            try:
                failures = tuple(parse_failures(fail_path.read_text(encoding="utf-8")))
            except ValueError as exc:
                log.warning("candidate %s: unreadable failure list for %s: %s", name, s.case_id, exc)
        out.append(CandidateOutput(s.case_id, s, flow, failures))
    return out


def write_candidate(directory: str | Path, name: str, outputs: Iterable[CandidateOutput]) -> Path:
    base = Path(directory) / "candidates" / name
    outputs = list(outputs)
    for sub in ("flows", "failures"):
        (base / sub).mkdir(parents=True, exist_ok=True)
    with open(base / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(write_summary_csv(o.summary for o in outputs))
    for o in outputs:
        with open(base / "flows" / f"{o.case_id}.flow", "w", encoding="utf-8", newline="") as fh:
            fh.write(write_flow_file(o.flow if o.flow is not None else EMPTY_FLOW))
        with open(base / "failures" / f"{o.case_id}.failures", "w", encoding="utf-8", newline="") as fh:
            fh.write(write_failures(o.failures))
    return base


# scoring --------------------------------------------------------------------


def compare_summary(candidate: SummaryRow, gt: SummaryRow, rel_tol: float = DEFAULT_REL_TOL) -> SummaryComparison:
    """Counts must be equal; execution time and cost may differ by ``rel_tol`` relative."""
    if candidate.case_id != gt.case_id:
        raise ValueError(f"comparing rows of different cases: {candidate.case_id!r} vs {gt.case_id!r}")
    diffs = [name for name in _EXACT_FIELDS if getattr(candidate, name) != getattr(gt, name)]
    for name in _CONTINUOUS_FIELDS:
        a, b = float(getattr(candidate, name)), float(getattr(gt, name))
        if not math.isclose(a, b, rel_tol=rel_tol, abs_tol=0.0):
            diffs.append(name)
    if candidate.failures_total != gt.failures_total:
        diffs.append("failures_total")
    for c in FailureCategory:
        if candidate.failures_by_category[c] != gt.failures_by_category[c]:
            diffs.append(f"failures_{c.value}")
    for s in gt.failures_by_severity:
        if candidate.failures_by_severity[s] != gt.failures_by_severity[s]:
            diffs.append(f"severity_{s.value}")
    return SummaryComparison(not diffs, tuple(diffs))


def token_similarity(a: str, b: str) -> float:
    """Multiset Jaccard over lowercase whitespace-separated words."""
    ca, cb = Counter(a.lower().split()), Counter(b.lower().split())
    union = sum((ca | cb).values())
    if union == 0:
        return 1.0
    return sum((ca & cb).values()) / union


def failure_list_similarity(candidate: Sequence[FailureRecord], gt: Sequence[FailureRecord]) -> float:
    """Greedy same-category pairing by descending message similarity, normalised by the longer list."""
    if not candidate and not gt:
        return 1.0
    pairs = []
    for i, c in enumerate(candidate):
        for j, g in enumerate(gt):
            if c.category is g.category:
                pairs.append((-token_similarity(c.message, g.message), i, j))
    pairs.sort()
    used_c: set[int] = set()
    used_g: set[int] = set()
    total = []
    for neg, i, j in pairs:
        if i in used_c or j in used_g:
            continue
        used_c.add(i)
        used_g.add(j)
        total.append(-neg)
    return math.fsum(total) / max(len(candidate), len(gt))


def evaluate_candidate(
    cases: Sequence[BenchCase],
    outputs: Sequence[CandidateOutput],
    costs: GedCostModel | None = None,
    *,
    budget: int = DEFAULT_BUDGET,
    rel_tol: float = DEFAULT_REL_TOL,
    name: str = "candidate",
) -> EvalReport:
    """Score ``outputs`` against the ground truth of ``cases``.

    A case without an output is a summary non-match with similarity 0 and no
    flow distance.

    Raises:
        UnknownCaseError: an output names a case that is not in ``cases``, or
            the same case twice.
    """
    by_id = {c.case_id: c for c in cases}
    got: dict[str, CandidateOutput] = {}
    for o in outputs:
        if o.case_id not in by_id:
            raise UnknownCaseError(f"candidate output for unknown case {o.case_id!r}")
        if o.case_id in got:
            raise UnknownCaseError(f"duplicate candidate output for case {o.case_id!r}")
        got[o.case_id] = o
    notes = []
    scores = []
    for case in sorted(cases, key=lambda c: c.case_id):
        o = got.get(case.case_id)
        if o is None:
            notes.append(f"{case.case_id}: no candidate output")
            scores.append(CaseScore(case.case_id, False, None, 0.0, (), has_output=False))
            continue
        cmp = compare_summary(o.summary.with_case_id(case.case_id), case.gt_summary, rel_tol)
        ged = graph_edit_distance(o.flow, case.gt_flow, costs, budget).distance if o.flow is not None else None
        sim = failure_list_similarity(o.failures, case.gt_failures)
        scores.append(CaseScore(case.case_id, cmp.match, ged, sim, cmp.diffs))
    return EvalReport(tuple(scores), name, tuple(notes))


# this engine as a candidate --------------------------------------------------

Checker = Callable[[str], Decimal]


def analyze_log(case_id: str, path: str | Path, evaluate: Checker | None = None) -> CandidateOutput:
    """Ingest, discover and summarise one log; unreadable logs give an empty, zero output."""
    try:
        traces = load_trace_file(path)
        trace = traces.primary()
        if len(traces.traces) > 1:
            log.warning("%s: log holds %d traces; analysing the largest (%s)", case_id, len(traces.traces), trace.trace_id)
        flow = discover_task_flow(trace)
    except (IngestError, FlowError, OSError) as exc:
        log.warning("%s: %s; reporting an empty flow", case_id, exc)
        return CandidateOutput(case_id, SummaryRow.zero(case_id), EMPTY_FLOW, ())
    failures = analyze_failures(trace, evaluate)
    summary = compute_summary(trace, flow, failures, case_id)
    return CandidateOutput(case_id, summary, flow, tuple(failures), final_output(trace, flow))


def run_engine_as_candidate(cases: Sequence[BenchCase], evaluate: Checker | None = None) -> list[CandidateOutput]:
    """Analyse every case log; ``evaluate`` defaults to the calculator's own evaluator."""
    if evaluate is None:
        from ata.tracegen.expr import eval_expression as evaluate
    return [analyze_log(c.case_id, c.log_path, evaluate) for c in cases]
