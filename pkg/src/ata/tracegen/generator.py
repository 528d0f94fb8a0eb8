"""Deterministic calculator-agent simulator.

A case is planned as a task tree (root, parse step, compute subtree mirroring
the expression) and then replayed on a simulated clock, emitting one span per
task.  Ground truth is recorded while emitting, so it never depends on the
discovery code it is later used to check.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from decimal import Decimal

from ata.analytics import FailureRecord, SummaryRow
from ata.errors import ExpressionError, ExpressionSyntaxError, InvalidSpecError
from ata.flow import MetricBag, TaskFlowGraph, TaskNode, TaskStatus
from ata.ingest import COST_USD, INPUT_TOKENS, LLM_CALL, LLM_MODEL, OUTPUT_TOKENS, TOOL_CALL, serialize_span
from ata.model import EntityKind, EntityRef, FailureCategory, GenAIEvent, Issue, LifecycleEventType, Severity, SpanRecord
from ata.tracegen.expr import (
    OP_NAMES,
    BinOp,
    ExpressionNode,
    Group,
    NLSnippet,
    Number,
    evaluate,
    format_value,
    has_nl,
    parse_expression,
)

ROOT = "T"
PARSE = "T.parse"
COMPUTE = "T.1"
WORKFLOW = "calculator-flow"
MODEL = "scripted-llm"
API_SERVICE = "calculator-api"
LOCAL_SERVICE = "calculator"
WORKERS = ("calc-worker-1", "calc-worker-2")

# 2025-01-01T00:00:00Z
EPOCH_NS = 1_735_689_600 * 10**9

PRICE_IN = Decimal("0.0000025")
PRICE_OUT = Decimal("0.00001")

BRACKET_LABELS = {"(": "bracket_round", "[": "bracket_square", "{": "bracket_curly"}

SEVERITY_OF = {
    FailureCategory.INSTRUCTION_VIOLATION: Severity.WARNING,
    FailureCategory.INCORRECT_INPUT: Severity.CRITICAL_ERROR,
    FailureCategory.VALIDATION: Severity.CRITICAL_ERROR,
    FailureCategory.VALIDATOR: Severity.WARNING,
}


@dataclass(frozen=True)
class Fault:
    category: FailureCategory
    point: str
    fatal: bool | None = None  # None: validation faults are fatal, the rest are not

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", FailureCategory.parse(self.category))
        if self.category is FailureCategory.INSTRUCTION_VIOLATION and self.fatal:
            raise InvalidSpecError("instruction violations are always recovered by replanning")

    @property
    def is_fatal(self) -> bool:
        if self.fatal is None:
            return self.category is FailureCategory.VALIDATION
        return self.fatal


@dataclass(frozen=True)
class CaseSpec:
    text: str
    distributed: bool = False
    parallel: bool = False
    decomposition_depth: int = 3
    faults: tuple[Fault, ...] = ()
    seed: int = 0
    case_id: str = "case"

    def __post_init__(self) -> None:
        object.__setattr__(self, "faults", tuple(self.faults))
        if not isinstance(self.decomposition_depth, int) or self.decomposition_depth < 1:
            raise InvalidSpecError(f"decomposition_depth must be an integer >= 1, got {self.decomposition_depth!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidSpecError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not self.text or not self.text.strip():
            raise InvalidSpecError("expression text is empty")


@dataclass(frozen=True)
class GeneratedCase:
    case_id: str
    spec: CaseSpec
    log_lines: tuple[str, ...]
    gt_flow: TaskFlowGraph
    gt_summary: SummaryRow
    gt_failures: tuple[FailureRecord, ...]
    final_output: Decimal | None
    expected: Decimal | None
    tags: tuple[str, ...]

    @property
    def log_text(self) -> str:
        return "".join(line + "\n" for line in self.log_lines)

    @property
    def correct(self) -> bool:
        return self.expected is not None and self.final_output == self.expected


# planning -------------------------------------------------------------------


@dataclass
class _Task:
    task_id: str
    label: str
    input: str
    value: Decimal | None
    llm: bool = False
    tool: bool = False
    depends_on: tuple[str, ...] = ()
    children: list[_Task] = field(default_factory=list)
    output: str | None = None


def as_expression(text: str) -> str:
    """Whole word problems are treated as a single NL snippet."""
    stripped = text.strip()
    if stripped[:1].isalpha():
        return "{" + stripped + "}"
    return text


def _plan_compute(node: ExpressionNode, task_id: str, level: int, depth: int) -> _Task:
    value = evaluate(node)
    text = node.render()
    if isinstance(node, NLSnippet):
        return _Task(task_id, "nl_solver", text, value, llm=True)
    if isinstance(node, Number) or level >= depth:
        return _Task(task_id, "evaluate", text, value, llm=has_nl(node), tool=True)
    if isinstance(node, Group):
        task = _Task(task_id, BRACKET_LABELS[node.bracket], text, value)
        operands: list[ExpressionNode] = [node.inner]
    else:
        assert isinstance(node, BinOp)
        task = _Task(task_id, OP_NAMES[node.op], text, value, tool=True)
        operands = [node.left, node.right]
    for operand in operands:
        if isinstance(operand, Number):
            continue
        child_id = f"{task_id}.{len(task.children) + 1}"
        task.children.append(_plan_compute(operand, child_id, level + 1, depth))
    return task


def _plan(spec: CaseSpec) -> tuple[_Task, ExpressionSyntaxError | None]:
    expr_text = as_expression(spec.text)
    try:
        tree = parse_expression(expr_text)
    except ExpressionSyntaxError as exc:
        root = _Task(ROOT, "calculator", spec.text, None, llm=True)
        root.children.append(_Task(PARSE, "parse_expression", spec.text, None, llm=True))
        return root, exc
    try:
        value = evaluate(tree)
    except ExpressionError as exc:
        raise InvalidSpecError(f"expression cannot be evaluated: {exc}") from None
    root = _Task(ROOT, "calculator", spec.text, value, llm=True)
    parse = _Task(PARSE, "parse_expression", spec.text, None, llm=True)
    parse.output = tree.render()
    compute = _plan_compute(tree, COMPUTE, 1, spec.decomposition_depth)
    compute.depends_on = (PARSE,)
    root.children = [parse, compute]
    return root, None


def _walk(task: _Task):
    yield task
    for child in task.children:
        yield from _walk(child)


def injection_points(spec: CaseSpec) -> dict[str, tuple[FailureCategory, ...]]:
    """Task ids of the planned tree and the fault categories each accepts."""
    root, syntax = _plan(spec)
    if syntax is not None:
        return {}
    points: dict[str, tuple[FailureCategory, ...]] = {}
    for task in _walk(root):
        cats = []
        if task.children:
            cats.append(FailureCategory.INSTRUCTION_VIOLATION)
        if task.task_id != ROOT:
            cats.append(FailureCategory.INCORRECT_INPUT)
        if task.task_id.startswith(COMPUTE):
            cats += [FailureCategory.VALIDATION, FailureCategory.VALIDATOR]
        points[task.task_id] = tuple(cats)
    return points


def task_labels(spec: CaseSpec) -> dict[str, str]:
    root, _ = _plan(spec)
    return {t.task_id: t.label for t in _walk(root)}


# simulation -----------------------------------------------------------------


class _Halt(Exception):
    """A fatal fault stopped the run."""


@dataclass
class _Emitted:
    task: _Task
    parent: str | None
    span_id: str
    service: str
    parent_span: str | None
    events: list[GenAIEvent] = field(default_factory=list)
    attributes: dict[str, object] = field(default_factory=dict)
    direct: MetricBag = field(default_factory=MetricBag)
    start: int | None = None
    end: int | None = None
    last: LifecycleEventType | None = None
    issues: list[Issue] = field(default_factory=list)


class _Simulator:
    def __init__(self, spec: CaseSpec, root: _Task) -> None:
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.root = root
        self.pending: dict[str, list[Fault]] = {}
        for fault in spec.faults:
            self.pending.setdefault(fault.point, []).append(fault)
        self.used = 0
        self.emitted: dict[str, _Emitted] = {}
        self.failures: list[tuple[tuple[int, str, int], FailureRecord]] = []
        self.trace_id = hashlib.sha256(f"{spec.case_id}:{spec.seed}".encode()).hexdigest()[:32]
        self.offsets = {API_SERVICE: 0, LOCAL_SERVICE: 0}
        for w in WORKERS:
            self.offsets[w] = self.rng.randint(-400_000, 400_000)
        self.fatal_task: str | None = None

    # helpers
    def step(self) -> int:
        return self.rng.randint(50_000, 2_000_000)

    def gap(self) -> int:
        return self.rng.randint(10_000, 200_000)

    def faults(self, task: _Task, category: FailureCategory) -> list[Fault]:
        return [f for f in self.pending.get(task.task_id, ()) if f.category is category]

    def service_for(self, task: _Task, parent_service: str | None, index: int) -> str:
        if not self.spec.distributed:
            return LOCAL_SERVICE
        if task.task_id in (ROOT, PARSE):
            return API_SERVICE
        if task.task_id == COMPUTE:
            return WORKERS[0]
        if parent_service == WORKERS[0] and task.task_id.count(".") == 2:
            return WORKERS[index % len(WORKERS)]
        return parent_service or WORKERS[0]

    def emit(
        self,
        rec: _Emitted,
        kind: LifecycleEventType,
        t: int,
        fields: dict[str, object] | None = None,
        issue: Issue | None = None,
        validator: FailureRecord | None = None,
        extra: tuple[EntityRef, ...] = (),
    ) -> None:
        when = t + self.offsets[rec.service]
        entity = EntityRef(EntityKind.TASK, rec.task.task_id, fields or {})
        event = GenAIEvent(kind, when, (entity, *extra), (issue,) if issue else ())
        idx = len(rec.events)
        rec.events.append(event)
        rec.last = kind
        if kind is LifecycleEventType.START and rec.start is None:
            rec.start = when
        if kind in (LifecycleEventType.END, LifecycleEventType.FAILURE, LifecycleEventType.ABORTION):
            rec.end = when
        key = (when, rec.span_id, idx)
        if issue is not None:
            rec.issues.append(issue)
            if issue.severity.is_failure:
                assert issue.category is not None
                self.failures.append((key, FailureRecord(issue.category, issue.severity, issue.message, rec.task.task_id)))
        if validator is not None:
            self.failures.append((key, validator))

    def issue(self, category: FailureCategory, message: str, task: _Task) -> Issue:
        self.used += 1
        return Issue(SEVERITY_OF[category], message, category, task.task_id)

    def fail(self, rec: _Emitted, t: int, fields: dict[str, object] | None = None, issue: Issue | None = None) -> None:
        self.emit(rec, LifecycleEventType.FAILURE, t, fields, issue)
        self.fatal_task = rec.task.task_id
        raise _Halt(t)

    def metrics(self, task: _Task) -> tuple[dict[str, object], MetricBag]:
        attrs: dict[str, object] = {}
        bag = MetricBag()
        if task.llm:
            tin = self.rng.randint(80, 600)
            tout = self.rng.randint(10, 200)
            cost = Decimal(repr(float(tin * PRICE_IN + tout * PRICE_OUT)))
            attrs.update({LLM_CALL: True, LLM_MODEL: MODEL, INPUT_TOKENS: tin, OUTPUT_TOKENS: tout, COST_USD: cost})
            bag = MetricBag(tin, tout, 1, 0, cost)
        if task.tool:
            attrs[TOOL_CALL] = True
            bag = bag.plus(MetricBag(tool_calls=1))
        return attrs, bag

    # the run
    def run(self, task: _Task, parent: _Emitted | None, t: int, index: int) -> int:
        service = self.service_for(task, parent.service if parent else None, index)
        rec = _Emitted(task, parent.task.task_id if parent else None, f"s{len(self.emitted) + 1:03d}", service, parent.span_id if parent else None)
        self.emitted[task.task_id] = rec
        rec.attributes, rec.direct = self.metrics(task)

        created: dict[str, object] = {}
        if parent is not None:
            created["parent_task_id"] = parent.task.task_id
        created["depends_on"] = list(task.depends_on)
        created["tool_id"] = task.label
        created["agent_id"] = "calculator-agent" if task.task_id in (ROOT, PARSE) else "worker-agent"
        created["input"] = task.input
        extra = (EntityRef(EntityKind.WORKFLOW, WORKFLOW),) if parent is None else ()
        self.emit(rec, LifecycleEventType.CREATION, t, created, extra=extra)
        t += 1_000
        self.emit(rec, LifecycleEventType.START, t)

        for n, fault in enumerate(self.faults(task, FailureCategory.INSTRUCTION_VIOLATION), start=1):
            missed = task.children[self.rng.randrange(len(task.children))].input
            t += self.step()
            msg = f"decomposition of {task.input!r} does not cover sub-expression {missed!r}"
            self.emit(rec, LifecycleEventType.UPDATE, t, {"children_planned": len(task.children) - 1}, self.issue(fault.category, msg, task))
            t += self.step()
            self.emit(rec, LifecycleEventType.UPDATE, t, {"replanned": n})

        try:
            t = self.run_children(task, rec, t)
        except _Halt as halt:
            end = halt.args[0] + self.gap()
            if parent is None:
                self.emit(rec, LifecycleEventType.FAILURE, end)
            else:
                self.emit(rec, LifecycleEventType.ABORTION, end)
            raise _Halt(end) from None

        for n, fault in enumerate(self.faults(task, FailureCategory.INCORRECT_INPUT), start=1):
            t += self.step()
            bad = _malform(task.input, self.rng)
            msg = f"received malformed input {bad!r} while processing {task.input!r}"
            issue = self.issue(fault.category, msg, task)
            if fault.is_fatal:
                self.fail(rec, t, {"input": bad}, issue)
            self.emit(rec, LifecycleEventType.UPDATE, t, {"input": bad}, issue)
            t += self.step()
            self.emit(rec, LifecycleEventType.UPDATE, t, {"retry": n})

        t += self.rng.randint(1_000_000, 50_000_000)
        output = task.output if task.output is not None else (format_value(task.value) if task.value is not None else None)

        for n, fault in enumerate(self.faults(task, FailureCategory.VALIDATION), start=1):
            t += self.step()
            assert task.value is not None
            wrong = format_value(task.value + self.rng.choice([d for d in range(-9, 10) if d]))
            msg = f"validation failed: {task.input!r} produced {wrong}"
            fields = {"validation": "rejected", "input": task.input, "output": wrong}
            issue = self.issue(fault.category, msg, task)
            if fault.is_fatal:
                self.fail(rec, t, fields, issue)
            self.emit(rec, LifecycleEventType.UPDATE, t, fields, issue)
            t += self.step()
            self.emit(rec, LifecycleEventType.UPDATE, t, {"retry": n})

        for fault in self.faults(task, FailureCategory.VALIDATOR):
            t += self.step()
            msg = f"validation rejected value {output} for {task.input!r}"
            self.used += 1
            note = Issue(Severity.INFO, msg, FailureCategory.VALIDATOR, task.task_id)
            record = FailureRecord(FailureCategory.VALIDATOR, Severity.WARNING, msg, task.task_id)
            fields = {"validation": "rejected", "input": task.input, "output": output}
            self.emit(rec, LifecycleEventType.UPDATE, t, fields, note, validator=record)
            if fault.is_fatal:
                t += self.step()
                self.fail(rec, t)

        t += self.step()
        self.emit(rec, LifecycleEventType.UPDATE, t, {"validation": "accepted"})
        t += self.step()
        self.emit(rec, LifecycleEventType.END, t, {"output": output} if output is not None else {})
        return t

    def run_children(self, task: _Task, rec: _Emitted, t: int) -> int:
        if not task.children:
            return t
        if task.task_id == ROOT or not self.spec.parallel:
            for i, child in enumerate(task.children):
                t = self.run(child, rec, t + self.gap(), i) + self.gap()
            return t
        begin = t + self.gap()
        latest = begin
        for i, child in enumerate(task.children):
            latest = max(latest, self.run(child, rec, begin + i * 2_000, i))
        return latest + self.gap()

    def run_syntax(self, error: ExpressionSyntaxError) -> None:
        root, parse = self.root, self.root.children[0]
        r = _Emitted(root, None, "s001", self.service_for(root, None, 0), None)
        self.emitted[ROOT] = r
        r.attributes, r.direct = self.metrics(root)
        t = 0
        self.emit(r, LifecycleEventType.CREATION, t, {"depends_on": [], "tool_id": root.label, "agent_id": "calculator-agent", "input": root.input}, extra=(EntityRef(EntityKind.WORKFLOW, WORKFLOW),))
        t += 1_000
        self.emit(r, LifecycleEventType.START, t)
        t += self.gap()
        p = _Emitted(parse, ROOT, "s002", self.service_for(parse, r.service, 0), "s001")
        self.emitted[PARSE] = p
        p.attributes, p.direct = self.metrics(parse)
        self.emit(p, LifecycleEventType.CREATION, t, {"parent_task_id": ROOT, "depends_on": [], "tool_id": parse.label, "agent_id": "calculator-agent", "input": parse.input})
        t += 1_000
        self.emit(p, LifecycleEventType.START, t)
        t += self.rng.randint(1_000_000, 50_000_000)
        issue = Issue(SEVERITY_OF[FailureCategory.INCORRECT_INPUT], f"syntax error: {error}", FailureCategory.INCORRECT_INPUT, PARSE)
        self.emit(p, LifecycleEventType.FAILURE, t, {"input": parse.input}, issue)
        t += self.gap()
        self.emit(r, LifecycleEventType.FAILURE, t)
        self.fatal_task = PARSE


def _malform(text: str, rng: random.Random) -> str:
    if len(text) < 2:
        return text + "+"
    cut = rng.randrange(1, len(text))
    return text[:cut] + rng.choice(["+", ")", "*/", "]"]) + text[cut:]


# ground truth ---------------------------------------------------------------


def _gt_flow(sim: _Simulator) -> TaskFlowGraph:
    rolled: dict[str, MetricBag] = {}

    def roll(rec: _Emitted) -> MetricBag:
        duration = rec.end - rec.start if rec.start is not None and rec.end is not None else 0
        d = rec.direct
        bag = MetricBag(d.input_tokens, d.output_tokens, d.llm_calls, d.tool_calls, d.cost_usd, duration)
        for child in sorted(c.task_id for c in rec.task.children if c.task_id in sim.emitted):
            bag = bag.plus(roll(sim.emitted[child]))
        rolled[rec.task.task_id] = bag
        return bag

    roll(sim.emitted[ROOT])
    statuses = {
        LifecycleEventType.END: TaskStatus.COMPLETED,
        LifecycleEventType.FAILURE: TaskStatus.FAILED,
        LifecycleEventType.ABORTION: TaskStatus.ABORTED,
    }
    nodes = [
        TaskNode(
            task_id=k,
            label=rec.task.label,
            status=statuses.get(rec.last, TaskStatus.INCOMPLETE),
            parent=rec.parent,
            depends_on=rec.task.depends_on,
            start=rec.start,
            end=rec.end,
            metrics=rolled[k],
            issues=tuple(rec.issues),
            workflow=WORKFLOW if k == ROOT else None,
        )
        for k, rec in sim.emitted.items()
    ]
    return TaskFlowGraph.build(nodes)


def generate_case(spec: CaseSpec) -> GeneratedCase:
    """Simulate one calculator run and return its log with ground truth.

    Raises:
        InvalidSpecError: a fault names an unknown task, a category the task
            cannot host, or can never fire because an earlier fault was fatal.
    """
    root, syntax = _plan(spec)
    if syntax is not None:
        if spec.faults:
            raise InvalidSpecError("syntax-error inputs take no extra faults")
    else:
        points = injection_points(spec)
        for fault in spec.faults:
            if fault.point not in points:
                raise InvalidSpecError(f"fault point {fault.point!r} is not a task of this case")
            if fault.category not in points[fault.point]:
                raise InvalidSpecError(f"task {fault.point!r} cannot host a {fault.category.value} fault")
    sim = _Simulator(spec, root)
    if syntax is not None:
        sim.run_syntax(syntax)
    else:
        try:
            sim.run(root, None, 0, 0)
        except _Halt:
            pass
        if sim.used != len(spec.faults):
            raise InvalidSpecError(f"{len(spec.faults) - sim.used} fault(s) unreachable after a fatal fault")

    base = EPOCH_NS + sim.rng.randrange(0, 86_400 * 10**9)
    spans = []
    for rec in sim.emitted.values():
        events = tuple(GenAIEvent(e.event_type, e.time + base, e.entities, e.issues) for e in rec.events)
        spans.append(
            SpanRecord(
                trace_id=sim.trace_id,
                span_id=rec.span_id,
                name=rec.task.label,
                service=rec.service,
                start=events[0].time,
                end=events[-1].time,
                parent_span_id=rec.parent_span,
                attributes=rec.attributes,
                events=events,
            )
        )
        rec.start = rec.start + base if rec.start is not None else None
        rec.end = rec.end + base if rec.end is not None else None
    log_lines = tuple(serialize_span(s) for s in spans)

    flow = _gt_flow(sim)
    failures = tuple(r for _, r in sorted(sim.failures, key=lambda item: item[0]))
    totals = flow.total_metrics()
    summary = SummaryRow.from_failures(
        spec.case_id,
        failures,
        execution_time_ns=max(s.end for s in spans) - min(s.start for s in spans),
        input_tokens=totals.input_tokens,
        output_tokens=totals.output_tokens,
        llm_calls=totals.llm_calls,
        tool_calls=totals.tool_calls,
        cost_usd=totals.cost_usd,
        task_count=len(flow),
    )
    expected = root.value
    final = root.value if flow.nodes[ROOT].status is TaskStatus.COMPLETED else None
    final = Decimal(format_value(final)) if final is not None else None

    tags = ["natural_language" if any(ch.isalpha() for ch in spec.text) else "numerical"]
    if spec.distributed:
        tags.append("distributed")
    if spec.parallel:
        tags.append("parallel")
    if syntax is not None:
        tags.append("syntax_error")
    tags.append("correct" if expected is not None and final == expected else "incorrect")
    if not failures:
        tags.append("happy_path")
    if any(f.category is FailureCategory.VALIDATOR for f in failures):
        tags.append("validator")
    return GeneratedCase(spec.case_id, spec, log_lines, flow, summary, failures, final, expected, tuple(tags))


# repeated runs --------------------------------------------------------------


def generate_runset(
    text: str,
    n: int = 5,
    seed: int = 0,
    *,
    max_depth: int = 4,
    fault_rate: float = 0.3,
    distributed: bool = False,
) -> list[GeneratedCase]:
    """``n`` runs of one input whose decomposition, timing and faults diverge by seed."""
    if n < 1:
        raise InvalidSpecError("a run set needs at least one run")
    rng = random.Random(seed)
    runs = []
    for i in range(n):
        case_seed = rng.getrandbits(64)
        depth = rng.randint(1, max_depth)
        base = CaseSpec(text, distributed, rng.random() < 0.5, depth, (), case_seed, f"run-{i + 1:02d}")
        faults: list[Fault] = []
        points = injection_points(base)
        if points and rng.random() < fault_rate:
            point = rng.choice(sorted(points))
            category = rng.choice(points[point])
            fatal = category is FailureCategory.VALIDATION and rng.random() < 0.5
            faults.append(Fault(category, point, fatal))
        runs.append(generate_case(CaseSpec(text, base.distributed, base.parallel, depth, tuple(faults), case_seed, base.case_id)))
    return runs

