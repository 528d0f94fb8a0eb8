import json
import random

import pytest

from ata.errors import DuplicateSpanError, EmptyInputError, MalformedLineError, NegativeTimestampError, UnknownEventTypeError
from ata.ingest import load_trace_set, parse_span_line, serialize_span, validate_trace
from ata.model import Issue, LifecycleEventType
from ata.tracegen.generator import CaseSpec, generate_case

from conftest import random_specs, span, task_event, trace_of


def _line(**over):
    data = {"trace_id": "t1", "span_id": "s1", "name": "op", "service": "svc", "start_ns": 0, "end_ns": 5}
    data.update(over)
    return json.dumps(data)


def test_minimal_line():
    s = parse_span_line(_line())
    assert (s.trace_id, s.span_id, s.start, s.end, s.events, s.parent_span_id) == ("t1", "s1", 0, 5, (), None)


def test_failure_event_roundtrip():
    issue = Issue("critical error", "result mismatch", "validation")
    original = span("s1", 0, 5, [task_event("failure", 3, "A", [issue])])
    parsed = parse_span_line(serialize_span(original))
    assert parsed == original
    assert parsed.events[0].event_type is LifecycleEventType.FAILURE


def test_unknown_event_type():
    line = _line(events=[{"type": "paused", "time_ns": 1, "entities": [{"kind": "task", "id": "A"}]}])
    with pytest.raises(UnknownEventTypeError, match="paused"):
        parse_span_line(line)


def test_malformed_json_reports_offset():
    with pytest.raises(MalformedLineError) as info:
        parse_span_line('{"trace_id": "t1", ')
    assert info.value.offset is not None


def test_negative_timestamp():
    with pytest.raises(NegativeTimestampError):
        parse_span_line(_line(start_ns=-1))


def test_missing_field_is_malformed():
    data = json.loads(_line())
    del data["span_id"]
    with pytest.raises(MalformedLineError):
        parse_span_line(json.dumps(data))


def test_grouping_by_trace():
    lines = [_line(span_id="a"), _line(span_id="b"), _line(trace_id="t2", span_id="c")]
    ts = load_trace_set(lines)
    assert {k: len(t.spans) for k, t in ts.traces.items()} == {"t1": 2, "t2": 1}
    assert ts.primary().trace_id == "t1"


def test_orphan_parent_warns():
    ts = load_trace_set([_line(parent_span_id="ghost")])
    assert [w.code for w in ts.parse_warnings] == ["orphan-parent"]


def test_duplicate_span():
    with pytest.raises(DuplicateSpanError) as info:
        load_trace_set([_line(), _line()])
    assert info.value.line == 2


def test_line_numbers_reported():
    with pytest.raises(MalformedLineError) as info:
        load_trace_set([_line(), "", "not json"])
    assert info.value.line == 3


def test_empty_input():
    with pytest.raises(EmptyInputError):
        load_trace_set(["", "  "])


def test_clean_generated_trace_validates():
    case = generate_case(CaseSpec("(6+2)*[8-3*2]", distributed=True, parallel=True, seed=7))
    trace = load_trace_set(case.log_lines).primary()
    assert validate_trace(trace) == []


def test_event_outside_span():
    t = trace_of(span("s1", 0, 5, [task_event("start", 1, "A"), task_event("end", 10, "A")]))
    assert [i.code for i in validate_trace(t)] == ["event-outside-span"]


def test_lifecycle_gap():
    t = trace_of(span("s1", 0, 5, [task_event("end", 2, "A")]))
    assert [i.code for i in validate_trace(t)] == ["lifecycle-gap"]


def test_no_root_is_critical():
    t = trace_of(span("s1", 0, 5, parent="s2"), span("s2", 0, 5, parent="s1"))
    assert any(i.code == "no-root" and i.severity.value == "critical_error" for i in validate_trace(t))


def test_clock_skew_tolerance():
    t = trace_of(span("p", 5_000_000, 9_000_000), span("c", 1_000_000, 8_000_000, parent="p"))
    assert [i.code for i in validate_trace(t)] == ["clock-skew"]
    assert validate_trace(t, skew_tolerance_ns=10_000_000) == []


def test_unknown_dependency():
    t = trace_of(span("s1", 0, 5, [task_event("creation", 1, "A", depends_on=["Z"])]))
    assert [i.code for i in validate_trace(t)] == ["unknown-dependency"]


@pytest.mark.slow
def test_ten_thousand_generated_spans_roundtrip():
    spans = 0
    for spec in random_specs(3000, seed=11):
        for line in generate_case(spec).log_lines:
            s = parse_span_line(line)
            assert parse_span_line(serialize_span(s)) == s
            spans += 1
        if spans >= 10_000:
            break
    assert spans >= 10_000


def test_line_order_does_not_matter():
    case = generate_case(CaseSpec("[4+8*(5-3)/2]-15+(7-(9/3))", parallel=True, seed=3))
    lines = list(case.log_lines)
    random.Random(0).shuffle(lines)
    assert load_trace_set(lines).traces == load_trace_set(case.log_lines).traces
