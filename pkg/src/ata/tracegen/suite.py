"""Benchmark suite composition, on-disk layout and the reference candidate."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import random
from collections import Counter
from collections.abc import Sequence
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from ata.analytics import FailureRecord, SummaryRow, write_failures, write_summary_csv
from ata.bench import CandidateOutput, write_candidate
from ata.errors import ExpressionSyntaxError, InfeasibleConfigError
from ata.flow import EMPTY_FLOW, TaskFlowGraph, write_flow_file
from ata.model import FailureCategory
from ata.tracegen import nl
from ata.tracegen.expr import format_value, parse_expression
from ata.tracegen.generator import CaseSpec, Fault, GeneratedCase, as_expression, generate_case, injection_points, task_labels

DEFAULT_SEED = 42
SUITE_FORMAT = "ata.suite/1"
REFERENCE_CANDIDATE = "tamas-like"

TABLE_INPUTS = (
    "(8-2)*3-(5+(11/2))/5",
    "[4+8*(5-3)/2]-15+(7-(9/3))",
    "2+{6*[12-({Multiply the sum of three, seven, and five by two. Then, subtract fifteen.}+3)]}/3+4*(7-5)-2/1",
    "14-{If you subtract 3 from 43 and then divide by 5, what is the result?}",
    next(iter(nl.WORD_PROBLEMS)),
)


@dataclass(frozen=True)
class SuiteConfig:
    cases: int = 30
    natural_language: int = 16
    distributed: int = 13
    parallel: int = 10
    syntax_error: int = 3
    incorrect: int = 9
    happy_path: int = 7
    validator_cases: int = 9
    min_depth: int = 2
    max_depth: int = 5
    table_cases: bool = True

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SuiteConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InfeasibleConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> SuiteConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InfeasibleConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise InfeasibleConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def check(self) -> None:
        """Raise :class:`InfeasibleConfigError` if no suite can meet these counts."""
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type in ("int", int) and (not isinstance(value, int) or isinstance(value, bool) or value < 0):
                raise InfeasibleConfigError(f"{f.name} must be a non-negative integer, got {value!r}")
        n = self.cases
        if n < 1:
            raise InfeasibleConfigError("a suite needs at least one case")
        for name in ("natural_language", "distributed", "parallel", "incorrect", "happy_path"):
            if getattr(self, name) > n:
                raise InfeasibleConfigError(f"{name}={getattr(self, name)} exceeds cases={n}")
        if self.syntax_error > self.incorrect:
            raise InfeasibleConfigError("syntax-error cases always end incorrect, so syntax_error cannot exceed incorrect")
        if self.happy_path > n - self.incorrect:
            raise InfeasibleConfigError(f"happy paths ({self.happy_path}) exceed correct outputs ({n - self.incorrect})")
        if self.validator_cases > n - self.syntax_error - self.happy_path:
            raise InfeasibleConfigError("validator cases need cases that are neither syntax errors nor happy paths")
        if not 1 <= self.min_depth <= self.max_depth:
            raise InfeasibleConfigError("need 1 <= min_depth <= max_depth")
        if self.table_cases:
            need = {
                "cases": (n, 5),
                "natural_language": (self.natural_language, 3),
                "numerical cases": (n - self.natural_language, 2),
                "happy_path": (self.happy_path, 1),
                "fatal incorrect cases": (self.incorrect - self.syntax_error, 2),
                "correct cases with issues": (n - self.incorrect - self.happy_path, 2),
                "validator_cases": (self.validator_cases, 2),
            }
            for what, (have, want) in need.items():
                if have < want:
                    raise InfeasibleConfigError(f"the five table cases need {what} >= {want}, got {have}")


@dataclass(frozen=True)
class Suite:
    config: SuiteConfig
    seed: int
    cases: tuple[GeneratedCase, ...]


# texts ----------------------------------------------------------------------

_DIVISORS = (2, 4, 5, 8, 10)
_CLOSE = {"(": ")", "[": "]", "{": "}"}


def _operand(rng: random.Random, depth: int) -> str:
    if depth == 0 or rng.random() < 0.35:
        return str(rng.randint(1, 20))
    bracket = rng.choice("([{")
    return bracket + random_expression(rng, depth - 1) + _CLOSE[bracket]


def random_expression(rng: random.Random, depth: int = 2) -> str:
    """Random bracketed arithmetic with divisions by terminating divisors only."""
    parts = [_operand(rng, depth)]
    for _ in range(rng.randint(1, 3)):
        op = rng.choice("+-*/")
        parts.append(op)
        parts.append(str(rng.choice(_DIVISORS)) if op == "/" else _operand(rng, depth))
    return "".join(parts)


def half_nl_expression(rng: random.Random, snippet: str) -> str:
    text = random_expression(rng, 1)
    numbers = [i for i, ch in enumerate(text) if ch.isdigit() and (i == 0 or not text[i - 1].isdigit())]
    numbers = [i for i in numbers if i == 0 or text[i - 1] != "/"]
    if not numbers:
        return "{" + snippet + "}+" + text
    start = rng.choice(numbers)
    end = start
    while end < len(text) and text[end].isdigit():
        end += 1
    return text[:start] + "{" + snippet + "}" + text[end:]


def break_syntax(rng: random.Random, text: str) -> str:
    """Corrupt ``text`` so that it no longer parses."""
    for _ in range(50):
        kind = rng.randrange(3)
        closers = [i for i, ch in enumerate(text) if ch in ")]}"]
        if kind == 0 and closers:
            i = rng.choice(closers)
            wrong = rng.choice([c for c in ")]}" if c != text[i]])
            candidate = text[:i] + wrong + text[i + 1 :]
        elif kind == 1 and closers:
            i = rng.choice(closers)
            candidate = text[:i] + text[i + 1 :]
        else:
            candidate = text + rng.choice("+-*/")
        try:
            parse_expression(as_expression(candidate))
        except ExpressionSyntaxError:
            return candidate
    return text + "*"


# composition ----------------------------------------------------------------

_HAPPY, _ISSUES, _FATAL, _SYNTAX = "happy", "issues", "fatal", "syntax"


@dataclass
class _Slot:
    role: str
    nl: bool = False
    validator: bool = False
    distributed: bool = False
    parallel: bool = False
    text: str | None = None
    depth: int | None = None
    faults: tuple[Fault, ...] | None = None


def _case_seed(seed: int, index: int) -> int:
    return int.from_bytes(hashlib.sha256(f"{seed}:{index}".encode()).digest()[:8], "big")


def _first(labels: dict[str, str], label: str) -> str:
    return next(k for k, v in labels.items() if v == label)


def _table_slots() -> list[_Slot]:
    row3 = CaseSpec(TABLE_INPUTS[2], decomposition_depth=8)
    multiply = _first(task_labels(row3), "multiply")
    nl4 = _first(task_labels(CaseSpec(TABLE_INPUTS[3])), "nl_solver")
    nl5 = _first(task_labels(CaseSpec(TABLE_INPUTS[4])), "nl_solver")
    v, ii, iv, vr = (
        FailureCategory.VALIDATION,
        FailureCategory.INCORRECT_INPUT,
        FailureCategory.INSTRUCTION_VIOLATION,
        FailureCategory.VALIDATOR,
    )
    return [
        _Slot(_HAPPY, text=TABLE_INPUTS[0], depth=4, faults=()),
        _Slot(_ISSUES, text=TABLE_INPUTS[1], depth=4, faults=(Fault(iv, "T.1"),)),
        _Slot(
            _FATAL,
            nl=True,
            text=TABLE_INPUTS[2],
            depth=8,
            faults=(Fault(iv, "T.1"), Fault(v, multiply, False), Fault(v, multiply, False), Fault(v, multiply, True)),
        ),
        _Slot(_ISSUES, nl=True, validator=True, text=TABLE_INPUTS[3], depth=3, faults=(Fault(v, nl4, False), Fault(vr, nl4, False))),
        _Slot(
            _FATAL,
            nl=True,
            validator=True,
            text=TABLE_INPUTS[4],
            depth=3,
            faults=tuple([Fault(ii, nl5, False)] * 6 + [Fault(vr, nl5, False)] * 2 + [Fault(vr, nl5, True)]),
        ),
    ]


def _pick(rng: random.Random, pool: list[int], k: int) -> set[int]:
    return set(rng.sample(pool, k))


def _compose(config: SuiteConfig, rng: random.Random) -> list[_Slot]:
    n = config.cases
    fixed = _table_slots() if config.table_cases else []
    rest = list(range(len(fixed), n))
    rng.shuffle(rest)
    counts = Counter(s.role for s in fixed)
    need = {
        _SYNTAX: config.syntax_error,
        _FATAL: config.incorrect - config.syntax_error - counts[_FATAL],
        _HAPPY: config.happy_path - counts[_HAPPY],
        _ISSUES: n - config.incorrect - config.happy_path - counts[_ISSUES],
    }
    slots: list[_Slot] = list(fixed) + [_Slot(_ISSUES) for _ in rest]
    cursor = 0
    for role in (_SYNTAX, _FATAL, _HAPPY, _ISSUES):
        for i in rest[cursor : cursor + need[role]]:
            slots[i] = _Slot(role)
        cursor += need[role]

    free = sorted(rest)
    nl_left = config.natural_language - sum(s.nl for s in fixed)
    for i in _pick(rng, free, nl_left):
        slots[i].nl = True
    hosts = [i for i in free if slots[i].role in (_ISSUES, _FATAL)]
    for i in _pick(rng, hosts, config.validator_cases - sum(s.validator for s in fixed)):
        slots[i].validator = True
    for i in _pick(rng, list(range(n)), config.distributed):
        slots[i].distributed = True
    for i in _pick(rng, list(range(n)), config.parallel):
        slots[i].parallel = True
    return slots


def _texts(slots: list[_Slot], rng: random.Random) -> None:
    used = set(TABLE_INPUTS)
    inline = [s for s in nl.INLINE if not any(s in t for t in TABLE_INPUTS)]
    problems = [p for p in nl.WORD_PROBLEMS if p not in used]
    rng.shuffle(inline)
    rng.shuffle(problems)
    for slot in slots:
        if slot.text is not None:
            continue
        if slot.nl:
            if problems and (not inline or rng.random() < 0.5) and slot.role != _SYNTAX:
                text = problems.pop()
            else:
                snippet = inline.pop() if inline else rng.choice(list(nl.INLINE))
                text = half_nl_expression(rng, snippet)
        else:
            text = random_expression(rng, rng.randint(1, 2))
        if slot.role == _SYNTAX:
            text = break_syntax(rng, text)
        slot.text = text


def _faults(slot: _Slot, spec: CaseSpec, rng: random.Random) -> tuple[Fault, ...]:
    points = injection_points(spec)
    compute = sorted(k for k, cats in points.items() if FailureCategory.VALIDATION in cats)
    iv, ii, v, vr = (
        FailureCategory.INSTRUCTION_VIOLATION,
        FailureCategory.INCORRECT_INPUT,
        FailureCategory.VALIDATION,
        FailureCategory.VALIDATOR,
    )
    if slot.role in (_HAPPY, _SYNTAX):
        return ()
    if slot.role == _ISSUES:
        out = []
        if slot.validator:
            out.append(Fault(vr, rng.choice(compute), False))
        for _ in range(rng.randint(0 if slot.validator else 1, 2)):
            point = rng.choice(sorted(points))
            category = rng.choice([c for c in points[point] if c is not vr])
            out.append(Fault(category, point, False))
        return tuple(out)
    target = rng.choice(compute)
    out = []
    if rng.random() < 0.4:
        out.append(Fault(iv, "T", False))
    if slot.validator:
        if rng.random() < 0.5:
            out.append(Fault(ii, target, False))
        out.extend([Fault(vr, target, False)] * rng.randint(0, 1))
        out.append(Fault(vr, target, True))
    elif rng.random() < 0.5:
        out.append(Fault(v, target, True))
    else:
        out.append(Fault(ii, rng.choice(compute + ["T.parse"]), True))
    return tuple(out)


def build_suite(config: SuiteConfig | None = None, seed: int = DEFAULT_SEED) -> Suite:
    """Compose and generate every case; a pure function of ``(config, seed)``."""
    config = config or SuiteConfig()
    config.check()
    rng = random.Random(seed)
    slots = _compose(config, rng)
    _texts(slots, rng)
    cases = []
    for i, slot in enumerate(slots):
        assert slot.text is not None
        depth = slot.depth if slot.depth is not None else rng.randint(config.min_depth, config.max_depth)
        base = CaseSpec(slot.text, slot.distributed, slot.parallel, depth, (), _case_seed(seed, i), f"case-{i + 1:02d}")
        faults = slot.faults if slot.faults is not None else _faults(slot, base, rng)
        spec = CaseSpec(base.text, base.distributed, base.parallel, depth, faults, base.seed, base.case_id)
        cases.append(generate_case(spec))
    return Suite(config, seed, tuple(cases))


# census ---------------------------------------------------------------------

CENSUS_KEYS = ("cases", "numerical", "natural_language", "distributed", "syntax_errors", "correct", "incorrect", "happy_paths")


def census(cases: Sequence[GeneratedCase]) -> dict[str, int]:
    tags = Counter(t for c in cases for t in c.tags)
    return {
        "cases": len(cases),
        "numerical": tags["numerical"],
        "natural_language": tags["natural_language"],
        "distributed": tags["distributed"],
        "syntax_errors": tags["syntax_error"],
        "correct": tags["correct"],
        "incorrect": tags["incorrect"],
        "happy_paths": tags["happy_path"],
    }


# reference candidate --------------------------------------------------------


def reference_candidate(case: GeneratedCase) -> tuple[TaskFlowGraph, SummaryRow, tuple[FailureRecord, ...]]:
    """Outputs of an analytics tool that misses validator failures and gives up on syntax errors."""
    if "syntax_error" in case.tags:
        return EMPTY_FLOW, SummaryRow.zero(case.case_id), ()
    kept = tuple(f for f in case.gt_failures if f.category is not FailureCategory.VALIDATOR)
    s = case.gt_summary
    summary = SummaryRow.from_failures(
        s.case_id,
        kept,
        execution_time_ns=s.execution_time_ns,
        input_tokens=s.input_tokens,
        output_tokens=s.output_tokens,
        llm_calls=s.llm_calls,
        tool_calls=s.tool_calls,
        cost_usd=s.cost_usd,
        task_count=s.task_count,
    )
    return case.gt_flow, summary, kept


# layout ---------------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cases_csv(cases: Sequence[GeneratedCase]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case_id", "input", "tags", "expected_output", "final_output"])
    for c in cases:
        w.writerow(
            [
                c.case_id,
                c.spec.text,
                ";".join(c.tags),
                "" if c.expected is None else format_value(c.expected),
                "" if c.final_output is None else format_value(c.final_output),
            ]
        )
    return buf.getvalue()


def write_suite(suite: Suite, out: str | Path) -> Path:
    """Write the benchmark directory; output bytes depend only on ``suite``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": SUITE_FORMAT,
        "seed": suite.seed,
        "config": suite.config.to_dict(),
        "census": census(suite.cases),
        "cases": [c.case_id for c in suite.cases],
    }
    _write(out / "suite.json", json.dumps(meta, indent=2) + "\n")
    _write(out / "cases.csv", cases_csv(suite.cases))
    _write(out / "gt" / "summary.csv", write_summary_csv(c.gt_summary for c in suite.cases))
    for c in suite.cases:
        _write(out / "logs" / f"{c.case_id}.log", c.log_text)
        _write(out / "gt" / "flows" / f"{c.case_id}.flow", write_flow_file(c.gt_flow))
        _write(out / "gt" / "failures" / f"{c.case_id}.failures", write_failures(c.gt_failures))
    outputs = []
    for c in suite.cases:
        flow, summary, failures = reference_candidate(c)
        outputs.append(CandidateOutput(c.case_id, summary, flow, failures))
    write_candidate(out, REFERENCE_CANDIDATE, outputs)
    return out


def generate_suite(config: SuiteConfig | None = None, seed: int = DEFAULT_SEED, out: str | Path | None = None) -> Suite:
    suite = build_suite(config, seed)
    if out is not None:
        write_suite(suite, out)
    return suite
