from decimal import Decimal

import pytest

from ata.errors import CycleDetectedError, MalformedFlowFileError, MissingDependencyError
from ata.flow import (
    EMPTY_FLOW,
    MetricBag,
    TaskFlowGraph,
    TaskNode,
    TaskStatus,
    discover_task_flow,
    flow_to_dot,
    parse_flow_file,
    span_metrics,
    write_flow_file,
)
from ata.ingest import load_trace_set
from ata.tracegen.generator import CaseSpec, generate_case

from conftest import FIXTURES, random_specs, span, task_event, trace_of


def _abc_trace():
    return trace_of(
        span("s1", 0, 100, [task_event("creation", 1, "A", tool_id="plan"), task_event("start", 2, "A"), task_event("end", 90, "A")]),
        span("s2", 10, 30, [task_event("creation", 10, "B", parent_task_id="A"), task_event("start", 11, "B"), task_event("end", 29, "B")], parent="s1"),
        span(
            "s3",
            40,
            80,
            [task_event("creation", 40, "C", parent_task_id="A", depends_on=["B"]), task_event("start", 41, "C"), task_event("failure", 79, "C")],
            parent="s1",
        ),
    )


def test_direct_transcription():
    flow = discover_task_flow(_abc_trace())
    assert flow.roots == ("A",)
    assert flow.children("A") == ["B", "C"]
    assert flow.dependency_edges() == [("B", "C")]
    assert flow.nodes["A"].label == "plan"
    assert flow.nodes["B"].label == "B"
    assert flow.nodes["C"].status is TaskStatus.FAILED
    assert (flow.nodes["B"].start, flow.nodes["B"].end) == (11, 29)


@pytest.mark.parametrize(
    "last, status",
    [("end", "completed"), ("failure", "failed"), ("abortion", "aborted"), ("suspension", "suspended"), ("update", "incomplete")],
)
def test_status_from_last_event(last, status):
    t = trace_of(span("s1", 0, 10, [task_event("start", 1, "A"), task_event(last, 5, "A")]))
    assert discover_task_flow(t).nodes["A"].status.value == status


def test_last_writer_wins_for_parent():
    t = trace_of(
        span("s1", 0, 10, [task_event("creation", 1, "P"), task_event("creation", 1, "Q")]),
        span("s2", 0, 10, [task_event("creation", 2, "X", parent_task_id="P"), task_event("update", 3, "X", parent_task_id="Q")]),
    )
    flow = discover_task_flow(t)
    assert flow.nodes["X"].parent == "Q"
    assert any("re-parented" in w for w in flow.warnings)


def test_sibling_cycle():
    t = trace_of(
        span("s1", 0, 10, [task_event("creation", 1, "X", depends_on=["Y"]), task_event("creation", 2, "Y", depends_on=["X"])])
    )
    with pytest.raises(CycleDetectedError) as info:
        discover_task_flow(t)
    assert info.value.cycle == ["X", "Y"]


def test_missing_dependency():
    t = trace_of(span("s1", 0, 10, [task_event("creation", 1, "X", depends_on=["ghost"])]))
    with pytest.raises(MissingDependencyError, match="ghost"):
        discover_task_flow(t)


def test_non_sibling_dependency_dropped():
    t = trace_of(
        span(
            "s1",
            0,
            10,
            [
                task_event("creation", 1, "A"),
                task_event("creation", 2, "B", parent_task_id="A"),
                task_event("creation", 3, "C", depends_on=["B"]),
            ],
        )
    )
    flow = discover_task_flow(t)
    assert flow.dependency_edges() == []
    assert any("non-sibling" in w for w in flow.warnings)


def test_metrics_charged_once_and_rolled_up():
    t = trace_of(
        span("s1", 0, 100, [task_event("creation", 1, "A")], **{"usage.input_tokens": 10, "llm.call": True}),
        span("s2", 5, 50, [task_event("creation", 6, "B", parent_task_id="A")], parent="s1", **{"usage.output_tokens": 5, "tool.call": True}),
        span("s3", 6, 9, [], parent="s2", **{"cost.usd": Decimal("0.5")}),
        span("s4", 0, 3, [], service="other", **{"usage.input_tokens": 7}),
    )
    flow = discover_task_flow(t)
    b = flow.nodes["B"].metrics
    assert (b.output_tokens, b.tool_calls, b.cost_usd) == (5, 1, Decimal("0.5"))
    a = flow.nodes["A"].metrics
    assert (a.input_tokens, a.output_tokens, a.llm_calls, a.tool_calls) == (10, 5, 1, 1)
    assert flow.unattributed.input_tokens == 7
    assert flow.total_metrics().input_tokens == 17


def test_pricing_hook_used_when_cost_absent():
    s = span("s1", 0, 1, **{"usage.input_tokens": 100, "usage.output_tokens": 10, "llm.model": "m"})
    bag = span_metrics(s, lambda model, i, o: Decimal(i + 2 * o) / 1000)
    assert bag.cost_usd == Decimal("0.12")


def test_generated_calculator_flow_matches_generator():
    case = generate_case(CaseSpec("(6+2)*[8-3*2]"))
    flow = discover_task_flow(load_trace_set(case.log_lines).primary())
    assert len(flow) == len(case.gt_flow)
    assert all(n.status is TaskStatus.COMPLETED for n in flow.nodes.values())
    assert flow == case.gt_flow


@pytest.mark.slow
def test_discovery_recovers_generator_tree():
    for spec in random_specs(300, seed=5):
        case = generate_case(spec)
        flow = discover_task_flow(load_trace_set(case.log_lines).primary())
        gt = case.gt_flow
        assert set(flow.nodes) == set(gt.nodes)
        assert sorted(flow.decomposition_edges()) == sorted(gt.decomposition_edges())
        assert sorted(flow.dependency_edges()) == sorted(gt.dependency_edges())


# DOT ------------------------------------------------------------------------


def test_dot_empty_graph():
    assert flow_to_dot(EMPTY_FLOW) == 'digraph "task_flow" {\n  rankdir=TB;\n  node [shape=box, fontname="Helvetica"];\n}\n'


def test_dot_single_node():
    dot = flow_to_dot(TaskFlowGraph.build([TaskNode("A", "x")]))
    assert sum(1 for line in dot.splitlines() if "[label=" in line) == 1


def test_dot_edge_styles():
    g = TaskFlowGraph.build([TaskNode("A", "a"), TaskNode("B", "b", parent="A"), TaskNode("X", "x", depends_on=("A",))])
    dot = flow_to_dot(g)
    assert dot.count("[style=solid]") == 1
    assert dot.count("[style=dashed]") == 1


def test_dot_golden():
    g = TaskFlowGraph.build(
        [
            TaskNode("A", "plan", "completed"),
            TaskNode("B", "add", "completed", parent="A"),
            TaskNode("C", "multiply", "failed", parent="A", depends_on=("B",)),
        ]
    )
    assert flow_to_dot(g) == (FIXTURES / "abc.dot").read_text()


def test_dot_quotes_awkward_ids():
    dot = flow_to_dot(TaskFlowGraph.build([TaskNode('a "b"\\c', "l")]))
    assert '"a \\"b\\"\\\\c"' in dot


def test_dot_independent_of_insertion_order():
    nodes = [TaskNode("B", "b", parent="A"), TaskNode("A", "a"), TaskNode("C", "c", parent="A")]
    assert flow_to_dot(TaskFlowGraph.build(nodes)) == flow_to_dot(TaskFlowGraph.build(nodes[::-1]))


# flow file -------------------------------------------------------------------


def test_flow_file_roundtrip_generated():
    for spec in random_specs(40, seed=9):
        gt = generate_case(spec).gt_flow
        assert parse_flow_file(write_flow_file(gt)) == gt


def test_flow_file_roundtrip_keeps_unattributed():
    g = TaskFlowGraph.build([TaskNode("A", "a")], MetricBag(input_tokens=3, cost_usd=Decimal("0.25")))
    assert parse_flow_file(write_flow_file(g)) == g


def test_bundled_flows_match_summary_rows(default_suite):
    for case in default_suite.cases:
        parsed = parse_flow_file(write_flow_file(case.gt_flow))
        assert len(parsed) == case.gt_summary.task_count


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ('{"nodes": [{"task_id": "A", "parent": "Z"}]}', "parent 'Z'"),
        ('{"nodes": [{"task_id": "A", "depends_on": ["Q"]}]}', "dependency 'Q'"),
        ('{"nodes": [{"task_id": "A"}, {"task_id": "A"}]}', "duplicate"),
        ('{"nodes": [{"task_id": "A", "status": "odd"}]}', "odd"),
        ('{"format": "other/9", "nodes": []}', "unsupported"),
        ("[1,", "line 1"),
    ],
)
def test_flow_file_errors(doc, fragment):
    with pytest.raises(MalformedFlowFileError, match=fragment):
        parse_flow_file(doc)


def test_flow_file_rejects_cycles():
    doc = '{"nodes": [{"task_id": "A", "depends_on": ["B"]}, {"task_id": "B", "depends_on": ["A"]}]}'
    with pytest.raises(MalformedFlowFileError, match="cycle"):
        parse_flow_file(doc)


def test_walk_is_preorder():
    g = TaskFlowGraph.build([TaskNode("A", "a"), TaskNode("A.2", "x", parent="A"), TaskNode("A.1", "x", parent="A"), TaskNode("A.1.1", "y", parent="A.1")])
    assert [n.task_id for n in g.walk()] == ["A", "A.1", "A.1.1", "A.2"]
