from __future__ import annotations

import random
import shutil
from pathlib import Path

import pytest
from hypothesis import settings

from ata.model import EntityRef, GenAIEvent, SpanRecord, Trace
from ata.tracegen.generator import CaseSpec
from ata.tracegen.suite import build_suite, random_expression, write_suite

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

REPO = Path(__file__).resolve().parents[1]
BUNDLED_SUITE = REPO / "suites" / "default"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def task_event(kind, time, task_id, issues=(), **fields):
    return GenAIEvent(kind, time, (EntityRef("task", task_id, fields),), tuple(issues))


def span(span_id, start, end, events=(), parent=None, trace_id="t1", service="svc", name="op", **attrs):
    return SpanRecord(trace_id, span_id, name, service, start, end, parent, attrs, tuple(events))


def trace_of(*spans, trace_id="t1"):
    return Trace(trace_id, tuple(spans))


def random_specs(n, seed=0, *, max_depth=5):
    rng = random.Random(seed)
    for i in range(n):
        yield CaseSpec(
            random_expression(rng, rng.randint(1, 2)),
            distributed=rng.random() < 0.5,
            parallel=rng.random() < 0.5,
            decomposition_depth=rng.randint(1, max_depth),
            seed=rng.getrandbits(64),
            case_id=f"p{i:05d}",
        )


@pytest.fixture(scope="session")
def default_suite():
    return build_suite()


@pytest.fixture(scope="session")
def suite_dir(tmp_path_factory, default_suite):
    out = tmp_path_factory.mktemp("suite")
    write_suite(default_suite, out)
    return out


@pytest.fixture
def suite_copy(tmp_path, suite_dir):
    dst = tmp_path / "suite"
    shutil.copytree(suite_dir, dst)
    return dst
