"""Task-flow discovery: rebuild the hierarchical task DAG from lifecycle events.

A flow has two edge kinds.  Decomposition edges run parent -> child and form a
forest; dependency edges run ``dep -> task`` between siblings and form a DAG.
"""

from __future__ import annotations

import graphlib
import json
import logging
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Any

from ata.errors import CycleDetectedError, MalformedFlowFileError, MissingDependencyError
from ata.ingest import COST_USD, INPUT_TOKENS, LLM_CALL, LLM_MODEL, OUTPUT_TOKENS, TOOL_CALL
from ata.model import (
    EntityKind,
    Issue,
    LifecycleEventType,
    SpanRecord,
    StrEnum,
    Trace,
)

log = logging.getLogger(__name__)

FLOW_FORMAT = "ata.flow/1"

PricingHook = Callable[[str, int, int], Decimal]


class TaskStatus(StrEnum):
    COMPLETED = "completed"
    FAILED = "failed"
    ABORTED = "aborted"
    SUSPENDED = "suspended"
    INCOMPLETE = "incomplete"

    @classmethod
    def from_last_event(cls, event_type: LifecycleEventType | None) -> TaskStatus:
        return _STATUS_BY_EVENT.get(event_type, cls.INCOMPLETE)


_STATUS_BY_EVENT = {
    LifecycleEventType.END: TaskStatus.COMPLETED,
    LifecycleEventType.FAILURE: TaskStatus.FAILED,
    LifecycleEventType.ABORTION: TaskStatus.ABORTED,
    LifecycleEventType.SUSPENSION: TaskStatus.SUSPENDED,
}

_TERMINAL = {LifecycleEventType.END, LifecycleEventType.FAILURE, LifecycleEventType.ABORTION}


@dataclass(frozen=True)
class MetricBag:
    input_tokens: int = 0
    output_tokens: int = 0
    llm_calls: int = 0
    tool_calls: int = 0
    cost_usd: Decimal = Decimal(0)
    duration_ns: int = 0

    def __post_init__(self) -> None:
        for name in ("input_tokens", "output_tokens", "llm_calls", "tool_calls", "duration_ns"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.cost_usd < 0:
            raise ValueError("cost_usd must be non-negative")

    def plus(self, other: MetricBag) -> MetricBag:
        """Sum counters and cost; keeps this bag's duration."""
        return MetricBag(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
            self.llm_calls + other.llm_calls,
            self.tool_calls + other.tool_calls,
            self.cost_usd + other.cost_usd,
            self.duration_ns,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "llm_calls": self.llm_calls,
            "tool_calls": self.tool_calls,
            "cost_usd": str(self.cost_usd),
            "duration_ns": self.duration_ns,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> MetricBag:
        return cls(
            input_tokens=int(data.get("input_tokens", 0)),
            output_tokens=int(data.get("output_tokens", 0)),
            llm_calls=int(data.get("llm_calls", 0)),
            tool_calls=int(data.get("tool_calls", 0)),
            cost_usd=Decimal(str(data.get("cost_usd", "0"))),
            duration_ns=int(data.get("duration_ns", 0)),
        )


def _truthy(value: object) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in {"true", "1", "yes"}
    return bool(value)


def span_metrics(span: SpanRecord, pricing: PricingHook | None = None) -> MetricBag:
    """Metrics carried by one span's reserved attributes (duration excluded)."""
    attrs = span.attributes
    in_tok = int(attrs.get(INPUT_TOKENS, 0))
    out_tok = int(attrs.get(OUTPUT_TOKENS, 0))
    if COST_USD in attrs:
        cost = Decimal(attrs[COST_USD])
    elif pricing is not None and (in_tok or out_tok):
        cost = Decimal(pricing(str(attrs.get(LLM_MODEL, "")), in_tok, out_tok))
    else:
        cost = Decimal(0)
    return MetricBag(
        input_tokens=in_tok,
        output_tokens=out_tok,
        llm_calls=1 if _truthy(attrs.get(LLM_CALL, False)) else 0,
        tool_calls=1 if _truthy(attrs.get(TOOL_CALL, False)) else 0,
        cost_usd=cost,
    )


@dataclass(frozen=True)
class TaskNode:
    task_id: str
    label: str
    status: TaskStatus = TaskStatus.INCOMPLETE
    parent: str | None = None
    depends_on: tuple[str, ...] = ()
    start: int | None = None
    end: int | None = None
    metrics: MetricBag = field(default_factory=MetricBag)
    issues: tuple[Issue, ...] = ()
    workflow: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", TaskStatus(self.status))
        object.__setattr__(self, "depends_on", tuple(self.depends_on))
        object.__setattr__(self, "issues", tuple(self.issues))
        if self.start is not None and self.end is not None and self.start > self.end:
            raise ValueError(f"task {self.task_id!r} ends before it starts")

    @property
    def failure_count(self) -> int:
        return sum(1 for i in self.issues if i.severity.is_failure)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "task_id": self.task_id,
            "label": self.label,
            "status": self.status.value,
            "parent": self.parent,
            "depends_on": list(self.depends_on),
            "start_ns": self.start,
            "end_ns": self.end,
            "metrics": self.metrics.to_dict(),
            "issues": [i.to_dict() for i in self.issues],
        }
        if self.workflow is not None:
            out["workflow"] = self.workflow
        return out


@dataclass(frozen=True)
class TaskFlowGraph:
    nodes: dict[str, TaskNode]
    roots: tuple[str, ...] = ()
    unattributed: MetricBag = field(default_factory=MetricBag)
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @classmethod
    def build(
        cls,
        nodes: Mapping[str, TaskNode] | list[TaskNode],
        unattributed: MetricBag | None = None,
        warnings: tuple[str, ...] = (),
    ) -> TaskFlowGraph:
        if not isinstance(nodes, Mapping):
            nodes = {n.task_id: n for n in nodes}
        ordered = {k: nodes[k] for k in sorted(nodes)}
        roots = tuple(k for k, n in ordered.items() if n.parent is None)
        return cls(ordered, roots, unattributed or MetricBag(), tuple(warnings))

    def __len__(self) -> int:
        return len(self.nodes)

    def children(self, task_id: str) -> list[str]:
        return [k for k, n in self.nodes.items() if n.parent == task_id]

    def decomposition_edges(self) -> list[tuple[str, str]]:
        return [(n.parent, k) for k, n in self.nodes.items() if n.parent is not None]

    def dependency_edges(self) -> list[tuple[str, str]]:
        return [(d, k) for k, n in self.nodes.items() for d in n.depends_on]

    def total_metrics(self) -> MetricBag:
        """Sum over root roll-ups plus anything no task could claim."""
        total = self.unattributed
        for root in self.roots:
            total = total.plus(self.nodes[root].metrics)
        return total

    def walk(self) -> Iterator[TaskNode]:
        """Depth-first pre-order, children in task-id order."""
        kids: dict[str | None, list[str]] = {}
        for k, n in self.nodes.items():
            kids.setdefault(n.parent, []).append(k)
        stack = list(reversed(self.roots))
        while stack:
            k = stack.pop()
            yield self.nodes[k]
            stack.extend(reversed(kids.get(k, [])))


# discovery ------------------------------------------------------------------


@dataclass
class _Acc:
    task_id: str
    label: str | None = None
    parent: str | None = None
    has_parent_decl: bool = False
    depends_on: tuple[str, ...] = ()
    start: int | None = None
    end: int | None = None
    last_event: LifecycleEventType | None = None
    issues: list[Issue] = field(default_factory=list)
    workflow: str | None = None
    direct: MetricBag = field(default_factory=MetricBag)


def _check_sibling_dag(nodes: Mapping[str, Any], deps_of: Callable[[Any], tuple[str, ...]]) -> None:
    sorter: graphlib.TopologicalSorter[str] = graphlib.TopologicalSorter()
    for task_id in sorted(nodes):
        sorter.add(task_id, *deps_of(nodes[task_id]))
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        cycle = list(exc.args[1])[:-1]
        i = cycle.index(min(cycle))
        raise CycleDetectedError(cycle[i:] + cycle[:i]) from None


def _check_parent_forest(parent_of: Mapping[str, str | None]) -> None:
    for start in sorted(parent_of):
        seen = [start]
        cur = parent_of[start]
        while cur is not None:
            if cur in seen:
                raise CycleDetectedError(seen[seen.index(cur) :])
            seen.append(cur)
            cur = parent_of.get(cur)


def discover_task_flow(trace: Trace, pricing: PricingHook | None = None) -> TaskFlowGraph:
    """Build the task-flow graph of ``trace`` from its task lifecycle events.

    Entity fields ``parent_task_id`` and ``depends_on`` are last-writer-wins by
    event time.  Each span's reserved metric attributes are charged to exactly
    one task (the earliest creation/start in that span, ties by task id) and
    then rolled up the decomposition forest.

    Raises:
        CycleDetectedError: sibling dependencies or parent links form a cycle.
        MissingDependencyError: a ``depends_on`` target never appears.
    """
    warnings: list[str] = []
    acc: dict[str, _Acc] = {}

    def node(task_id: str) -> _Acc:
        if task_id not in acc:
            acc[task_id] = _Acc(task_id)
        return acc[task_id]

    timeline = []
    for span in trace.spans:
        for idx, event in enumerate(span.events):
            timeline.append((event.time, span.span_id, idx, event))
    timeline.sort(key=lambda item: item[:3])

    issue_only: list[str] = []
    for _, _, _, event in timeline:
        workflows = [e.id for e in event.entities if e.kind is EntityKind.WORKFLOW]
        tasks = list(event.tasks())
        for entity in tasks:
            a = node(entity.id)
            f = entity.fields
            if "parent_task_id" in f:
                new_parent = f["parent_task_id"] or None
                new_parent = str(new_parent) if new_parent is not None else None
                if a.has_parent_decl and new_parent != a.parent:
                    warnings.append(f"task {entity.id!r} re-parented from {a.parent!r} to {new_parent!r}")
                a.parent = new_parent
                a.has_parent_decl = True
            if "depends_on" in f:
                a.depends_on = tuple(dict.fromkeys(f["depends_on"]))
            label = f.get("tool_id", f.get("name"))
            if label is not None:
                a.label = str(label)
            if workflows:
                a.workflow = workflows[0]
            a.last_event = event.event_type
            if event.event_type is LifecycleEventType.START and a.start is None:
                a.start = event.time
            if event.event_type in _TERMINAL:
                a.end = event.time
        for issue in event.issues:
            anchor = issue.entity_id or (tasks[0].id if tasks else None)
            if anchor is None:
                continue
            if anchor not in acc:
                issue_only.append(anchor)
            node(anchor).issues.append(issue)

    for task_id in issue_only:
        if acc[task_id].last_event is None:
            warnings.append(f"task {task_id!r} referenced only by issues; placeholder created")

    for a in list(acc.values()):
        if a.parent is not None and a.parent not in acc:
            warnings.append(f"task {a.task_id!r} names unknown parent {a.parent!r}; placeholder created")
            node(a.parent)
    _check_parent_forest({k: a.parent for k, a in acc.items()})

    for task_id in sorted(acc):
        a = acc[task_id]
        kept = []
        for dep in a.depends_on:
            if dep not in acc:
                raise MissingDependencyError(task_id, dep)
            if acc[dep].parent != a.parent:
                warnings.append(f"dropped non-sibling dependency {dep!r} -> {task_id!r}")
                continue
            kept.append(dep)
        a.depends_on = tuple(kept)
    _check_sibling_dag(acc, lambda a: a.depends_on)

    unattributed = MetricBag()
    owner_of_span: dict[str, str | None] = {}
    by_span = {s.span_id: s for s in trace.spans}

    def owner(span: SpanRecord) -> str | None:
        if span.span_id in owner_of_span:
            return owner_of_span[span.span_id]
        owner_of_span[span.span_id] = None  # guards against parent-span cycles
        found = None
        ranked = [
            (event.time, 0 if event.event_type in (LifecycleEventType.CREATION, LifecycleEventType.START) else 1, e.id)
            for event in span.events
            for e in event.tasks()
        ]
        primary = [r for r in ranked if r[1] == 0]
        pick = min(primary or ranked, default=None, key=lambda r: (r[0], r[2]))
        if pick is not None:
            found = pick[2]
        elif span.parent_span_id in by_span:
            found = owner(by_span[span.parent_span_id])
        owner_of_span[span.span_id] = found
        return found

    for span in trace.spans:
        bag = span_metrics(span, pricing)
        task_id = owner(span)
        if task_id is None:
            unattributed = unattributed.plus(bag)
        else:
            acc[task_id].direct = acc[task_id].direct.plus(bag)

    children: dict[str, list[str]] = {}
    for k, a in acc.items():
        if a.parent is not None:
            children.setdefault(a.parent, []).append(k)
    rolled: dict[str, MetricBag] = {}

    def roll(task_id: str) -> MetricBag:
        a = acc[task_id]
        duration = a.end - a.start if a.start is not None and a.end is not None and a.end >= a.start else 0
        bag = MetricBag(
            a.direct.input_tokens, a.direct.output_tokens, a.direct.llm_calls, a.direct.tool_calls, a.direct.cost_usd, duration
        )
        for child in sorted(children.get(task_id, ())):
            bag = bag.plus(roll(child))
        rolled[task_id] = bag
        return bag

    for k, a in acc.items():
        if a.parent is None:
            roll(k)

    nodes = []
    for k, a in acc.items():
        start, end = a.start, a.end
        if start is not None and end is not None and end < start:
            warnings.append(f"task {k!r} terminal event precedes its start; end dropped")
            end = None
        nodes.append(
            TaskNode(
                task_id=k,
                label=a.label if a.label is not None else k,
                status=TaskStatus.from_last_event(a.last_event),
                parent=a.parent,
                depends_on=a.depends_on,
                start=start,
                end=end,
                metrics=rolled[k],
                issues=tuple(a.issues),
                workflow=a.workflow,
            )
        )
    for w in warnings:
        log.warning("%s: %s", trace.trace_id, w)
    return TaskFlowGraph.build(nodes, unattributed, tuple(warnings))


# DOT ------------------------------------------------------------------------


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def flow_to_dot(flow: TaskFlowGraph, name: str = "task_flow") -> str:
    """Render ``flow`` as Graphviz DOT; equal graphs give byte-equal text."""
    lines = [f"digraph {_dot_quote(name)} {{", "  rankdir=TB;", '  node [shape=box, fontname="Helvetica"];']
    for task_id, n in flow.nodes.items():
        lines.append(f"  {_dot_quote(task_id)} [label={_dot_quote(n.label + chr(10) + n.status.value)}];")
    for parent, child in sorted(flow.decomposition_edges()):
        lines.append(f"  {_dot_quote(parent)} -> {_dot_quote(child)} [style=solid];")
    for dep, task in sorted(flow.dependency_edges()):
        lines.append(f"  {_dot_quote(dep)} -> {_dot_quote(task)} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# flow file ------------------------------------------------------------------


def write_flow_file(flow: TaskFlowGraph) -> str:
    doc: dict[str, Any] = {"format": FLOW_FORMAT, "nodes": [n.to_dict() for n in flow.nodes.values()]}
    if flow.unattributed != MetricBag():
        doc["unattributed"] = flow.unattributed.to_dict()
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _opt_int(value: Any, where: str, key: str) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedFlowFileError(f"{key} must be an integer or null", where)
    return value


def parse_flow_file(text: str) -> TaskFlowGraph:
    """Parse a flow document produced by :func:`write_flow_file`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFlowFileError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("nodes"), list):
        raise MalformedFlowFileError("expected an object with a 'nodes' list", "document")
    if doc.get("format", FLOW_FORMAT) != FLOW_FORMAT:
        raise MalformedFlowFileError(f"unsupported format {doc.get('format')!r}", "document")

    nodes: dict[str, TaskNode] = {}
    for i, raw in enumerate(doc["nodes"]):
        where = f"nodes[{i}]"
        if not isinstance(raw, dict):
            raise MalformedFlowFileError("node must be an object", where)
        task_id = raw.get("task_id")
        if not isinstance(task_id, str) or not task_id:
            raise MalformedFlowFileError("task_id must be a non-empty string", where)
        where = f"nodes[{i}] ({task_id})"
        if task_id in nodes:
            raise MalformedFlowFileError("duplicate task_id", where)
        deps = raw.get("depends_on", [])
        if not isinstance(deps, list) or not all(isinstance(d, str) for d in deps):
            raise MalformedFlowFileError("depends_on must be a list of task ids", where)
        try:
            nodes[task_id] = TaskNode(
                task_id=task_id,
                label=str(raw.get("label", task_id)),
                status=TaskStatus(raw.get("status", "incomplete")),
                parent=raw.get("parent"),
                depends_on=tuple(deps),
                start=_opt_int(raw.get("start_ns"), where, "start_ns"),
                end=_opt_int(raw.get("end_ns"), where, "end_ns"),
                metrics=MetricBag.from_dict(raw.get("metrics") or {}),
                issues=tuple(Issue.from_dict(x) for x in raw.get("issues") or ()),
                workflow=raw.get("workflow"),
            )
        except MalformedFlowFileError:
            raise
        except (ValueError, TypeError, InvalidOperation, AttributeError) as exc:
            raise MalformedFlowFileError(str(exc), where) from None

    for task_id, n in nodes.items():
        if n.parent is not None and n.parent not in nodes:
            raise MalformedFlowFileError(f"parent {n.parent!r} is not a node", task_id)
        for dep in n.depends_on:
            if dep not in nodes:
                raise MalformedFlowFileError(f"dependency {dep!r} is not a node", task_id)
            if nodes[dep].parent != n.parent:
                raise MalformedFlowFileError(f"dependency {dep!r} is not a sibling", task_id)
    try:
        _check_parent_forest({k: n.parent for k, n in nodes.items()})
        _check_sibling_dag(nodes, lambda n: n.depends_on)
    except CycleDetectedError as exc:
        raise MalformedFlowFileError(str(exc), "nodes") from None
    unattributed = MetricBag.from_dict(doc["unattributed"]) if "unattributed" in doc else None
    return TaskFlowGraph.build(nodes, unattributed)


EMPTY_FLOW = TaskFlowGraph({}, ())
