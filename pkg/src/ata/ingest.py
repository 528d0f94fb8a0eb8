"""Parse line-delimited JSON trace logs and validate the resulting traces.

One span per line; see ``docs/trace-format.md`` for the field list.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

from ata.errors import (
    DuplicateSpanError,
    EmptyInputError,
    IngestError,
    InvalidValueError,
    MalformedLineError,
    NegativeTimestampError,
    UnknownEventTypeError,
    UnknownKindError,
)
from ata.model import EntityKind, LifecycleEventType, Severity, SpanRecord, Trace

log = logging.getLogger(__name__)

DEFAULT_SKEW_TOLERANCE_NS = 1_000_000

# reserved attribute keys
INPUT_TOKENS = "usage.input_tokens"
OUTPUT_TOKENS = "usage.output_tokens"
LLM_MODEL = "llm.model"
LLM_CALL = "llm.call"
TOOL_CALL = "tool.call"
COST_USD = "cost.usd"


@dataclass(frozen=True)
class ValidationIssue:
    severity: Severity
    location: str
    message: str
    code: str = "invalid"

    def __str__(self) -> str:
        return f"{self.severity.value} [{self.code}] {self.location}: {self.message}"


@dataclass(frozen=True)
class TraceSet:
    traces: dict[str, Trace]
    parse_warnings: tuple[ValidationIssue, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.traces)

    def primary(self) -> Trace:
        """The trace holding the most spans (ties: smallest trace id)."""
        return min(self.traces.values(), key=lambda t: (-len(t.spans), t.trace_id))


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def serialize_span(span: SpanRecord) -> str:
    return json.dumps(span.to_dict(), ensure_ascii=False, separators=(",", ":"))


def parse_span_line(text: str) -> SpanRecord:
    """Parse one log line into a :class:`SpanRecord`."""
    try:
        data = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise MalformedLineError(exc.msg, offset=_byte_offset(text, exc.pos)) from None
    if not isinstance(data, dict):
        raise MalformedLineError("expected a JSON object", offset=0)
    for key in ("start_ns", "end_ns"):
        value = data.get(key)
        if isinstance(value, int) and value < 0:
            raise NegativeTimestampError(f"{key} is negative ({value})")
    for event in data.get("events") or ():
        if isinstance(event, dict):
            if isinstance(event.get("time_ns"), int) and event["time_ns"] < 0:
                raise NegativeTimestampError(f"event time_ns is negative ({event['time_ns']})")
            try:
                LifecycleEventType.parse(event.get("type"))
            except UnknownKindError as exc:
                raise UnknownEventTypeError(str(exc)) from None
    try:
        return SpanRecord.from_dict(data)
    except (InvalidValueError, TypeError, AttributeError) as exc:
        raise MalformedLineError(str(exc)) from None


def load_trace_set(lines: Iterable[str]) -> TraceSet:
    """Group spans from ``lines`` into traces; blank lines are skipped."""
    by_trace: dict[str, dict[str, SpanRecord]] = defaultdict(dict)
    seen_any = False
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        seen_any = True
        try:
            span = parse_span_line(line.rstrip("\n"))
        except IngestError as exc:
            raise exc.with_line(lineno) from None
        spans = by_trace[span.trace_id]
        if span.span_id in spans:
            raise DuplicateSpanError(f"duplicate span_id {span.span_id!r} in trace {span.trace_id!r}", line=lineno)
        spans[span.span_id] = span
    if not seen_any:
        raise EmptyInputError("no spans in input")

    warnings: list[ValidationIssue] = []
    traces: dict[str, Trace] = {}
    for trace_id in sorted(by_trace):
        spans = by_trace[trace_id]
        trace = Trace(trace_id, tuple(spans.values()))
        for span in trace.spans:
            if span.parent_span_id is not None and span.parent_span_id not in spans:
                warnings.append(
                    ValidationIssue(
                        Severity.WARNING,
                        span.span_id,
                        f"parent span {span.parent_span_id!r} not found in trace {trace_id!r}",
                        "orphan-parent",
                    )
                )
        traces[trace_id] = trace
    return TraceSet(traces, tuple(warnings))


def load_trace_file(path: str | Path) -> TraceSet:
    with open(path, encoding="utf-8") as fh:
        return load_trace_set(fh)


def validate_trace(trace: Trace, skew_tolerance_ns: int = DEFAULT_SKEW_TOLERANCE_NS) -> list[ValidationIssue]:
    """Check a trace for structural and lifecycle problems; never raises."""
    issues: list[ValidationIssue] = []
    roots = trace.roots
    if not roots:
        issues.append(ValidationIssue(Severity.CRITICAL_ERROR, trace.trace_id, "trace has no root span", "no-root"))
    per_service: dict[str, int] = defaultdict(int)
    for span in roots:
        per_service[span.service] += 1
    for service, count in sorted(per_service.items()):
        if count > 1:
            issues.append(
                ValidationIssue(Severity.WARNING, trace.trace_id, f"service {service!r} has {count} root spans", "multiple-roots")
            )

    by_id = {s.span_id: s for s in trace.spans}
    known_tasks: set[str] = set()
    timeline = []
    for span in trace.spans:
        for idx, event in enumerate(span.events):
            if not span.start <= event.time <= span.end:
                issues.append(
                    ValidationIssue(
                        Severity.WARNING,
                        span.span_id,
                        f"{event.event_type.value} event at {event.time} outside span window [{span.start}, {span.end}]",
                        "event-outside-span",
                    )
                )
            for entity in event.tasks():
                known_tasks.add(entity.id)
            timeline.append((event.time, span.span_id, idx, event))
        parent = by_id.get(span.parent_span_id) if span.parent_span_id else None
        if parent is not None and parent.start - span.start > skew_tolerance_ns:
            issues.append(
                ValidationIssue(
                    Severity.WARNING,
                    span.span_id,
                    f"starts {parent.start - span.start} ns before parent {parent.span_id!r} "
                    f"(tolerance {skew_tolerance_ns} ns)",
                    "clock-skew",
                )
            )

    timeline.sort(key=lambda item: item[:3])
    started: set[str] = set()
    reported: set[tuple[str, str]] = set()
    for _, span_id, _, event in timeline:
        for entity in event.tasks():
            if event.event_type is LifecycleEventType.START:
                started.add(entity.id)
            elif event.event_type is LifecycleEventType.END and entity.id not in started:
                issues.append(
                    ValidationIssue(Severity.WARNING, span_id, f"task {entity.id!r} ends without a start event", "lifecycle-gap")
                )
            for dep in entity.fields.get("depends_on", ()):
                if dep not in known_tasks and (entity.id, dep) not in reported:
                    reported.add((entity.id, dep))
                    issues.append(
                        ValidationIssue(
                            Severity.WARNING, span_id, f"task {entity.id!r} depends on unknown task {dep!r}", "unknown-dependency"
                        )
                    )
    return issues


def has_critical(issues: Iterable[ValidationIssue]) -> bool:
    return any(i.severity is Severity.CRITICAL_ERROR for i in issues)

