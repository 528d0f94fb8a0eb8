"""Per-trace summaries, failure extraction and optimization recommendations."""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Any

import networkx as nx

from ata.flow import TaskFlowGraph, TaskStatus
from ata.model import FailureCategory, LifecycleEventType, Severity, StrEnum, Trace

FAILURE_SEVERITIES = (Severity.CRITICAL_ERROR, Severity.WARNING)
UNCATEGORIZED_NOTE = "[uncategorized] "


@dataclass(frozen=True)
class FailureRecord:
    category: FailureCategory
    severity: Severity
    message: str
    task_id: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", FailureCategory.parse(self.category))
        object.__setattr__(self, "severity", Severity.parse(self.severity))
        if self.severity not in FAILURE_SEVERITIES:
            raise ValueError(f"failure severity must be critical_error or warning, got {self.severity.value}")
        if not self.message or not self.message.strip():
            raise ValueError("failure message must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "category": self.category.value,
            "severity": self.severity.value,
            "message": self.message,
            "task_id": self.task_id,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FailureRecord:
        return cls(data["category"], data["severity"], data["message"], data.get("task_id"))


def write_failures(records: Iterable[FailureRecord]) -> str:
    """One JSON object per line; an empty list gives an empty file."""
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in records)


def parse_failures(text: str) -> list[FailureRecord]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(FailureRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"failure list line {lineno}: {exc}") from None
    return out


# summary --------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    case_id: str
    execution_time_ns: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    llm_calls: int = 0
    tool_calls: int = 0
    cost_usd: Decimal = Decimal(0)
    task_count: int = 0
    failures_by_category: dict[FailureCategory, int] = field(default_factory=dict)
    failures_by_severity: dict[Severity, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cats = {c: int(self.failures_by_category.get(c, 0)) for c in FailureCategory}
        sevs = {s: int(self.failures_by_severity.get(s, 0)) for s in FAILURE_SEVERITIES}
        extra = set(self.failures_by_severity) - set(FAILURE_SEVERITIES)
        if any(self.failures_by_severity[s] for s in extra):
            raise ValueError("only critical_error and warning failures can be counted")
        if sum(cats.values()) != sum(sevs.values()):
            raise ValueError(f"{self.case_id}: category counts and severity counts disagree")
        object.__setattr__(self, "failures_by_category", cats)
        object.__setattr__(self, "failures_by_severity", sevs)
        object.__setattr__(self, "cost_usd", Decimal(self.cost_usd))

    @property
    def failures_total(self) -> int:
        return sum(self.failures_by_category.values())

    @property
    def happy_path(self) -> bool:
        return self.failures_total == 0

    @classmethod
    def zero(cls, case_id: str) -> SummaryRow:
        return cls(case_id)

    @classmethod
    def from_failures(cls, case_id: str, failures: Sequence[FailureRecord], **metrics: Any) -> SummaryRow:
        cats = {c: 0 for c in FailureCategory}
        sevs = {s: 0 for s in FAILURE_SEVERITIES}
        for f in failures:
            cats[f.category] += 1
            sevs[f.severity] += 1
        return cls(case_id, failures_by_category=cats, failures_by_severity=sevs, **metrics)

    def with_case_id(self, case_id: str) -> SummaryRow:
        return SummaryRow(
            case_id,
            self.execution_time_ns,
            self.input_tokens,
            self.output_tokens,
            self.llm_calls,
            self.tool_calls,
            self.cost_usd,
            self.task_count,
            self.failures_by_category,
            self.failures_by_severity,
        )

    def to_csv_dict(self) -> dict[str, str]:
        row = {
            "case_id": self.case_id,
            "execution_time_ns": str(self.execution_time_ns),
            "input_tokens": str(self.input_tokens),
            "output_tokens": str(self.output_tokens),
            "llm_calls": str(self.llm_calls),
            "tool_calls": str(self.tool_calls),
            "cost_usd": str(self.cost_usd),
            "task_count": str(self.task_count),
            "failures_total": str(self.failures_total),
        }
        for c in FailureCategory:
            row[f"failures_{c.value}"] = str(self.failures_by_category[c])
        for s in FAILURE_SEVERITIES:
            row[f"severity_{s.value}"] = str(self.failures_by_severity[s])
        row["happy_path"] = "true" if self.happy_path else "false"
        return row

    @classmethod
    def from_csv_dict(cls, row: dict[str, str]) -> SummaryRow:
        try:
            summary = cls(
                case_id=row["case_id"],
                execution_time_ns=int(row["execution_time_ns"]),
                input_tokens=int(row["input_tokens"]),
                output_tokens=int(row["output_tokens"]),
                llm_calls=int(row["llm_calls"]),
                tool_calls=int(row["tool_calls"]),
                cost_usd=Decimal(row["cost_usd"]),
                task_count=int(row["task_count"]),
                failures_by_category={c: int(row[f"failures_{c.value}"]) for c in FailureCategory},
                failures_by_severity={s: int(row[f"severity_{s.value}"]) for s in FAILURE_SEVERITIES},
            )
        except (KeyError, ValueError, InvalidOperation) as exc:
            raise ValueError(f"bad summary row {row.get('case_id')!r}: {exc}") from None
        if int(row["failures_total"]) != summary.failures_total:
            raise ValueError(f"{summary.case_id}: failures_total disagrees with per-category counts")
        if (row["happy_path"].strip().lower() == "true") != summary.happy_path:
            raise ValueError(f"{summary.case_id}: happy_path disagrees with failure counts")
        return summary


SUMMARY_COLUMNS = list(SummaryRow("x").to_csv_dict())


def write_summary_csv(rows: Iterable[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.to_csv_dict())
    return buf.getvalue()


def read_summary_csv(text: str) -> list[SummaryRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or list(reader.fieldnames) != SUMMARY_COLUMNS:
        raise ValueError(f"summary header must be {','.join(SUMMARY_COLUMNS)}")
    return [SummaryRow.from_csv_dict(r) for r in reader]


# failures -------------------------------------------------------------------


def _timeline(trace: Trace):
    items = []
    for span in trace.spans:
        for idx, event in enumerate(span.events):
            items.append((event.time, span.span_id, idx, event))
    items.sort(key=lambda item: item[:3])
    return items


def _event_failures(event) -> list[FailureRecord]:
    out = []
    tasks = list(event.tasks())
    for issue in event.issues:
        if not issue.severity.is_failure:
            continue
        task_id = issue.entity_id or (tasks[0].id if tasks else None)
        if issue.category is None:
            out.append(FailureRecord(FailureCategory.VALIDATION, issue.severity, UNCATEGORIZED_NOTE + issue.message, task_id))
        else:
            out.append(FailureRecord(issue.category, issue.severity, issue.message, task_id))
    return out


def extract_failures(trace: Trace) -> list[FailureRecord]:
    """One record per warning-or-worse issue, ordered by event time then span id.

    Issues without a category are reported as validation failures with an
    ``[uncategorized]`` prefix on the message.
    """
    out = []
    for _, _, _, event in _timeline(trace):
        out.extend(_event_failures(event))
    return out


Checker = Callable[[str], Decimal]

REJECTED = "rejected"


def _as_decimal(value: object) -> Decimal | None:
    try:
        return Decimal(str(value))
    except (InvalidOperation, ValueError):
        return None


def _validator_records(event, evaluate: Checker) -> list[FailureRecord]:
    out = []
    for entity in event.tasks():
        f = entity.fields
        if f.get("validation") != REJECTED or "input" not in f or "output" not in f:
            continue
        got = _as_decimal(f["output"])
        try:
            truth = evaluate(str(f["input"]))
        except Exception:  # noqa: BLE001 - any evaluator failure means "cannot judge"
            continue
        if got is None or got != truth:
            continue
        notes = [i for i in event.issues if not i.severity.is_failure and (i.entity_id in (None, entity.id))]
        message = notes[0].message if notes else f"correct value {got} for {f['input']!r} was rejected"
        out.append(FailureRecord(FailureCategory.VALIDATOR, Severity.WARNING, message, entity.id))
    return out


def detect_validator_failures(trace: Trace, evaluate: Checker) -> list[FailureRecord]:
    """Find validation rejections of values that were in fact correct.

    Looks at sub-failure (info/debug) issues on events whose task entity carries
    ``validation="rejected"`` together with ``input`` and ``output`` fields, and
    re-evaluates ``input`` with ``evaluate``.  A rejected output equal to the
    re-evaluated value is a validator failure.  Inputs ``evaluate`` cannot handle
    are skipped.
    """
    out = []
    for _, _, _, event in _timeline(trace):
        out.extend(_validator_records(event, evaluate))
    return out


def analyze_failures(trace: Trace, evaluate: Checker | None = None) -> list[FailureRecord]:
    """Logged failures plus detected validator failures, merged in event order."""
    if evaluate is None:
        return extract_failures(trace)
    out = []
    for _, _, _, event in _timeline(trace):
        out.extend(_event_failures(event))
        out.extend(_validator_records(event, evaluate))
    return out


def compute_summary(
    trace: Trace,
    flow: TaskFlowGraph,
    failures: Sequence[FailureRecord] | None = None,
    case_id: str | None = None,
) -> SummaryRow:
    """Summary row for one trace; ``failures`` defaults to :func:`extract_failures`."""
    if failures is None:
        failures = extract_failures(trace)
    totals = flow.total_metrics()
    if trace.spans:
        elapsed = max(s.end for s in trace.spans) - min(s.start for s in trace.spans)
    else:
        elapsed = 0
    return SummaryRow.from_failures(
        case_id if case_id is not None else trace.trace_id,
        failures,
        execution_time_ns=elapsed,
        input_tokens=totals.input_tokens,
        output_tokens=totals.output_tokens,
        llm_calls=totals.llm_calls,
        tool_calls=totals.tool_calls,
        cost_usd=totals.cost_usd,
        task_count=len(flow),
    )


def final_output(trace: Trace, flow: TaskFlowGraph) -> Decimal | None:
    """The ``output`` field on the last end event of a completed root task."""
    roots = [r for r in flow.roots if flow.nodes[r].status is TaskStatus.COMPLETED]
    if len(roots) != 1:
        return None
    value = None
    for _, _, _, event in _timeline(trace):
        if event.event_type is not LifecycleEventType.END:
            continue
        for entity in event.tasks():
            if entity.id == roots[0] and "output" in entity.fields:
                value = entity.fields["output"]
    return _as_decimal(value) if value is not None else None


# recommendations ------------------------------------------------------------


class RecommendationKind(StrEnum):
    PARALLEL_EXECUTION = "parallel_execution"
    DECOMPOSITION = "decomposition"
    MERGING = "merging"


_KIND_ORDER = {k: i for i, k in enumerate(RecommendationKind)}


@dataclass(frozen=True)
class Recommendation:
    kind: RecommendationKind
    target_tasks: tuple[str, ...]
    rationale: str
    estimated_latency_gain_ns: int = 0

    def __post_init__(self) -> None:
        if not self.target_tasks:
            raise ValueError("a recommendation needs at least one target task")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "target_tasks": list(self.target_tasks),
            "rationale": self.rationale,
            "estimated_latency_gain_ns": self.estimated_latency_gain_ns,
        }


@dataclass(frozen=True)
class RecommendConfig:
    decompose_failure_threshold: int = 2
    merge_duration_ceiling_ns: int = 10_000_000


def dependency_closure(flow: TaskFlowGraph) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(flow.nodes)
    g.add_edges_from(flow.dependency_edges())
    return nx.transitive_closure_dag(g)


def _disjoint(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[1] < b[0] or b[1] < a[0]


def recommend(flow: TaskFlowGraph, config: RecommendConfig | None = None) -> list[Recommendation]:
    """Static optimization hints: parallel execution, decomposition, merging."""
    config = config or RecommendConfig()
    reach = dependency_closure(flow)
    out: list[Recommendation] = []

    groups: dict[str | None, list[str]] = {}
    for k, n in flow.nodes.items():
        groups.setdefault(n.parent, []).append(k)

    for parent in sorted(groups, key=lambda p: (p is not None, p or "")):
        timed = [k for k in groups[parent] if flow.nodes[k].start is not None and flow.nodes[k].end is not None]
        span = {k: (flow.nodes[k].start, flow.nodes[k].end) for k in timed}
        compat = nx.Graph()
        compat.add_nodes_from(timed)
        for i, a in enumerate(timed):
            for b in timed[i + 1 :]:
                if reach.has_edge(a, b) or reach.has_edge(b, a):
                    continue
                if _disjoint(span[a], span[b]):
                    compat.add_edge(a, b)
        cliques = sorted(tuple(sorted(c)) for c in nx.find_cliques(compat) if len(c) >= 2)
        for members in cliques:
            durations = [span[k][1] - span[k][0] for k in members]
            out.append(
                Recommendation(
                    RecommendationKind.PARALLEL_EXECUTION,
                    members,
                    f"{len(members)} independent sibling tasks ran one after another",
                    sum(durations) - max(durations),
                )
            )
        for i, a in enumerate(timed):
            for b in timed[i + 1 :]:
                na, nb = flow.nodes[a], flow.nodes[b]
                if na.label != nb.label:
                    continue
                combined = (span[a][1] - span[a][0]) + (span[b][1] - span[b][0])
                if combined < config.merge_duration_ceiling_ns:
                    out.append(
                        Recommendation(
                            RecommendationKind.MERGING,
                            (a, b),
                            f"sibling tasks share label {na.label!r} and together take {combined} ns",
                        )
                    )

    for k, n in flow.nodes.items():
        if n.failure_count >= config.decompose_failure_threshold:
            out.append(
                Recommendation(
                    RecommendationKind.DECOMPOSITION,
                    (k,),
                    f"task has {n.failure_count} failures (threshold {config.decompose_failure_threshold})",
                )
            )
    out.sort(key=lambda r: (_KIND_ORDER[r.kind], r.target_tasks))
    return out

