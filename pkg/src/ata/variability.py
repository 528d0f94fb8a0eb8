"""Cross-run variability: coefficient of variation, MSE and flow divergence."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from collections.abc import Sequence
from dataclasses import dataclass
from decimal import Decimal

from ata.analytics import SummaryRow
from ata.flow import TaskFlowGraph
from ata.ged import DEFAULT_BUDGET, GedCostModel, mean_pairwise_ged


@dataclass(frozen=True)
class CvResult:
    value: float | None  # percent; None when undefined
    mean: float
    std: float

    @property
    def undefined(self) -> bool:
        return self.value is None


def coefficient_of_variation(values: Sequence[float | Decimal | int]) -> CvResult:
    """Population CV in percent.

    ``std == 0`` gives 0 (even for a zero mean); a zero mean with non-zero
    spread is undefined.  The magnitude of the mean is used so the result is
    never negative.
    """
    if len(values) < 2:
        raise ValueError(f"need at least two values, got {len(values)}")
    xs = [float(v) for v in values]
    mean = statistics.fmean(xs)
    std = statistics.pstdev(xs)
    if std == 0:
        return CvResult(0.0, mean, 0.0)
    if mean == 0:
        return CvResult(None, mean, std)
    return CvResult(100.0 * std / abs(mean), mean, std)


def squared_errors(outputs: Sequence[Decimal | float | None], expected: Decimal | float, penalty: float | None = None) -> list[float]:
    """Per-run squared error; an absent output costs ``penalty`` (default: expected squared)."""
    exp = float(expected)
    miss = exp * exp if penalty is None else float(penalty)
    return [miss if o is None else (float(o) - exp) ** 2 for o in outputs]


def mse(outputs: Sequence[Decimal | float | None], expected: Decimal | float, penalty: float | None = None) -> float:
    if not outputs:
        raise ValueError("need at least one run")
    errs = squared_errors(outputs, expected, penalty)
    return math.fsum(errs) / len(errs)


@dataclass(frozen=True)
class RunRecord:
    flow: TaskFlowGraph
    summary: SummaryRow
    output: Decimal | None


@dataclass(frozen=True)
class VariabilityRunSet:
    runs: tuple[RunRecord, ...]
    expected: Decimal

    @property
    def n(self) -> int:
        return len(self.runs)


@dataclass(frozen=True)
class VariabilityReport:
    n: int
    cv_accuracy: CvResult
    cv_cost: CvResult
    cv_time: CvResult
    cv_llm_calls: CvResult
    flow_variability: float
    mse: float

    def to_dict(self) -> dict:
        def cv(r: CvResult) -> dict:
            return {"value": r.value, "mean": r.mean, "std": r.std, "undefined": r.undefined}

        return {
            "runs": self.n,
            "cv_accuracy": cv(self.cv_accuracy),
            "cv_cost": cv(self.cv_cost),
            "cv_time": cv(self.cv_time),
            "cv_llm_calls": cv(self.cv_llm_calls),
            "flow_variability": self.flow_variability,
            "mse": self.mse,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self, label: str = "runset") -> str:
        def pct(r: CvResult) -> str:
            return "undefined" if r.value is None else f"{r.value:.6f}"

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "accuracy_cv_pct", "cost_cv_pct", "execution_time_cv_pct", "llm_calls_cv_pct", "flow_variability_mean_ged", "mse"])
        w.writerow([label, pct(self.cv_accuracy), pct(self.cv_cost), pct(self.cv_time), pct(self.cv_llm_calls), f"{self.flow_variability:.6f}", f"{self.mse:.6f}"])
        return buf.getvalue()


def run_variability(
    runset: VariabilityRunSet,
    costs: GedCostModel | None = None,
    budget: int = DEFAULT_BUDGET,
    penalty: float | None = None,
) -> VariabilityReport:
    if runset.n < 2:
        raise ValueError(f"need at least two runs, got {runset.n}")
    outputs = [r.output for r in runset.runs]
    return VariabilityReport(
        n=runset.n,
        cv_accuracy=coefficient_of_variation(squared_errors(outputs, runset.expected, penalty)),
        cv_cost=coefficient_of_variation([r.summary.cost_usd for r in runset.runs]),
        cv_time=coefficient_of_variation([r.summary.execution_time_ns for r in runset.runs]),
        cv_llm_calls=coefficient_of_variation([r.summary.llm_calls for r in runset.runs]),
        flow_variability=mean_pairwise_ged([r.flow for r in runset.runs], costs, budget),
        mse=mse(outputs, runset.expected, penalty),
    )
