"""Graph edit distance between task-flow graphs.

Nodes are labelled by task label; edges are directed and typed (decomposition
or dependency), so an edge whose type changes costs a delete plus an insert.
Graphs up to ``budget`` nodes get an exact branch-and-bound answer, larger ones
a deterministic greedy upper bound flagged ``exact=False``.

The search kernel is compiled from ``_ged_kernel.pyx`` when available; set
``ATA_PURE_PYTHON=1`` to force the pure-Python kernel.
"""

from __future__ import annotations

import math
import os
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from itertools import combinations

from ata import _ged_py
from ata.flow import TaskFlowGraph

DEFAULT_BUDGET = 12

DECOMPOSITION = 1
DEPENDENCY = 2

Kernel = Callable[..., tuple[float, list[int]]]

KERNELS: dict[str, Kernel] = {"python": _ged_py.branch_and_bound}
try:
    from ata._ged_kernel import branch_and_bound as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    KERNELS["cython"] = _compiled

if _compiled is not None and os.environ.get("ATA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    KERNEL = "cython"
else:
    KERNEL = "python"


@dataclass(frozen=True)
class GedCostModel:
    node_insert: float = 1.0
    node_delete: float = 1.0
    node_substitute: float = 1.0
    edge_insert: float = 1.0
    edge_delete: float = 1.0

    def __post_init__(self) -> None:
        for name in ("node_insert", "node_delete", "node_substitute", "edge_insert", "edge_delete"):
            value = getattr(self, name)
            if not value >= 0 or math.isinf(value):
                raise ValueError(f"{name} must be a finite non-negative number")

    def substitute(self, label_a: str, label_b: str) -> float:
        return 0.0 if label_a == label_b else self.node_substitute

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.node_insert, self.node_delete, self.node_substitute, self.edge_insert, self.edge_delete)


UNIT_COSTS = GedCostModel()


@dataclass(frozen=True)
class GedResult:
    distance: float
    exact: bool
    node_mapping: dict[str, str] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class EncodedGraph:
    ids: tuple[str, ...]
    labels: tuple[str, ...]
    codes: tuple[int, ...]  # flattened n*n edge-type matrix

    def __len__(self) -> int:
        return len(self.ids)

    def code(self, u: int, v: int) -> int:
        return self.codes[u * len(self.ids) + v]


def encode(flow: TaskFlowGraph) -> EncodedGraph:
    ids = tuple(sorted(flow.nodes))
    index = {k: i for i, k in enumerate(ids)}
    n = len(ids)
    codes = [0] * (n * n)
    for parent, child in flow.decomposition_edges():
        codes[index[parent] * n + index[child]] = DECOMPOSITION
    for dep, task in flow.dependency_edges():
        codes[index[dep] * n + index[task]] = DEPENDENCY
    return EncodedGraph(ids, tuple(flow.nodes[k].label for k in ids), tuple(codes))


def mapping_cost(a: EncodedGraph, b: EncodedGraph, phi: Sequence[int], costs: GedCostModel = UNIT_COSTS) -> float:
    """Cost of the edit path induced by ``phi`` (A index -> B index or -1)."""
    total = 0.0
    image = set()
    for u, x in enumerate(phi):
        if x < 0:
            total += costs.node_delete
        else:
            image.add(x)
            total += costs.substitute(a.labels[u], b.labels[x])
    total += costs.node_insert * (len(b) - len(image))
    matched = 0
    for u in range(len(a)):
        for v in range(len(a)):
            c = a.code(u, v)
            if not c:
                continue
            x, y = phi[u], phi[v]
            if x >= 0 and y >= 0 and b.code(x, y) == c:
                matched += 1
            else:
                total += costs.edge_delete
    b_edges = sum(1 for c in b.codes if c)
    total += costs.edge_insert * (b_edges - matched)
    return total


def _greedy_mapping(a: EncodedGraph, b: EncodedGraph, costs: GedCostModel, seed_ids: bool) -> list[int]:
    phi = [-1] * len(a)
    free = set(range(len(b)))
    b_index = {k: i for i, k in enumerate(b.ids)}
    pending = list(range(len(a)))
    if seed_ids:
        rest = []
        for u in pending:
            x = b_index.get(a.ids[u])
            if x is not None and x in free and a.labels[u] == b.labels[x]:
                phi[u] = x
                free.discard(x)
            else:
                rest.append(u)
        pending = rest
    rest = []
    for u in pending:
        same = [x for x in sorted(free) if b.labels[x] == a.labels[u]]
        if same:
            phi[u] = same[0]
            free.discard(same[0])
        else:
            rest.append(u)
    if costs.node_substitute < costs.node_delete + costs.node_insert:
        for u, x in zip(rest, sorted(free)):
            phi[u] = x
    return phi


def greedy_ged(a: EncodedGraph, b: EncodedGraph, costs: GedCostModel = UNIT_COSTS) -> tuple[float, list[int]]:
    """Deterministic upper bound: best of id-seeded and label-only greedy matchings."""
    best: tuple[float, list[int]] | None = None
    for seed_ids in (True, False):
        phi = _greedy_mapping(a, b, costs, seed_ids)
        cost = mapping_cost(a, b, phi, costs)
        if best is None or cost < best[0]:
            best = (cost, phi)
    assert best is not None
    return best


def _label_ids(a: EncodedGraph, b: EncodedGraph) -> tuple[list[int], list[int]]:
    table = {lab: i for i, lab in enumerate(sorted(set(a.labels) | set(b.labels)))}
    return [table[x] for x in a.labels], [table[x] for x in b.labels]


def exact_ged(
    a: EncodedGraph, b: EncodedGraph, costs: GedCostModel = UNIT_COSTS, kernel: str | None = None
) -> tuple[float, list[int]]:
    upper, phi = greedy_ged(a, b, costs)
    la, lb = _label_ids(a, b)
    run = KERNELS[kernel or KERNEL]
    distance, mapping = run(la, lb, list(a.codes), list(b.codes), costs.as_tuple(), upper)
    if distance < upper and (mapping or not len(a)):
        return distance, mapping
    return upper, phi


def graph_edit_distance(
    a: TaskFlowGraph,
    b: TaskFlowGraph,
    costs: GedCostModel | None = None,
    budget: int = DEFAULT_BUDGET,
    kernel: str | None = None,
) -> GedResult:
    """Edit distance from ``a`` to ``b``; exact when both fit in ``budget`` nodes."""
    costs = costs or UNIT_COSTS
    ea, eb = encode(a), encode(b)
    if max(len(ea), len(eb)) <= budget:
        distance, phi = exact_ged(ea, eb, costs, kernel)
        exact = True
    else:
        distance, phi = greedy_ged(ea, eb, costs)
        exact = False
    mapping = {ea.ids[u]: eb.ids[x] for u, x in enumerate(phi) if x >= 0}
    return GedResult(distance, exact, mapping if exact else None)


def mean_pairwise_ged(
    graphs: Sequence[TaskFlowGraph], costs: GedCostModel | None = None, budget: int = DEFAULT_BUDGET
) -> float:
    """Average GED over all C(n, 2) unordered pairs of ``graphs``."""
    if len(graphs) < 2:
        raise ValueError(f"need at least two graphs, got {len(graphs)}")
    distances = [graph_edit_distance(g, h, costs, budget).distance for g, h in combinations(graphs, 2)]
    return math.fsum(distances) / len(distances)
