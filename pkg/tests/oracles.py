"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import random
from decimal import Decimal
from functools import lru_cache
from itertools import combinations, permutations

import numpy as np

from ata.flow import TaskFlowGraph, TaskNode


# graph edit distance: exhaustive enumeration ---------------------------------


@lru_cache(maxsize=None)
def _all_mappings(m: int, n: int) -> np.ndarray:
    """Every partial injection from m A-nodes into n B-nodes, one row each (-1 = deleted)."""
    rows = []
    for k in range(min(m, n) + 1):
        for dom in combinations(range(m), k):
            for img in permutations(range(n), k):
                row = [-1] * m
                for u, x in zip(dom, img):
                    row[u] = x
                rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(len(rows), m)


def _adjacency(flow: TaskFlowGraph) -> tuple[list[str], list[str], np.ndarray]:
    ids = sorted(flow.nodes)
    idx = {k: i for i, k in enumerate(ids)}
    adj = np.zeros((len(ids), len(ids)), dtype=np.int64)
    for k, node in flow.nodes.items():
        if node.parent is not None:
            adj[idx[node.parent], idx[k]] = 1
        for d in node.depends_on:
            adj[idx[d], idx[k]] = 2
    return ids, [flow.nodes[k].label for k in ids], adj


def brute_force_ged(a: TaskFlowGraph, b: TaskFlowGraph, ins=1.0, dele=1.0, sub=1.0, eins=1.0, edel=1.0) -> float:
    """Minimum edit cost over every node mapping, evaluated in bulk with numpy."""
    _, la, adj_a = _adjacency(a)
    _, lb, adj_b = _adjacency(b)
    m, n = len(la), len(lb)
    maps = _all_mappings(m, n)
    k = maps.shape[0]
    cost = np.zeros(k)
    mapped = maps >= 0
    n_mapped = mapped.sum(axis=1)
    cost += dele * (m - n_mapped) + ins * (n - n_mapped)
    if m and n:
        lb_arr = np.array(lb + [""], dtype=object)
        for u in range(m):
            target = lb_arr[maps[:, u]]  # index -1 hits the sentinel
            cost += sub * (mapped[:, u] & (target != la[u]))
    matched = np.zeros(k, dtype=np.int64)
    edges_a = [(u, v, adj_a[u, v]) for u in range(m) for v in range(m) if adj_a[u, v]]
    if n:
        for u, v, c in edges_a:
            x, y = maps[:, u], maps[:, v]
            ok = (x >= 0) & (y >= 0)
            hit = np.zeros(k, dtype=bool)
            hit[ok] = adj_b[x[ok], y[ok]] == c
            matched += hit
    e_a = len(edges_a)
    e_b = int((adj_b != 0).sum())
    cost += edel * (e_a - matched) + eins * (e_b - matched)
    return float(cost.min())


# random flow graphs -----------------------------------------------------------


def random_flow(rng: random.Random, max_nodes: int = 5, labels: str = "abc", min_nodes: int = 1) -> TaskFlowGraph:
    size = rng.randint(min_nodes, max_nodes)
    ids = [f"n{i}" for i in range(size)]
    parent: dict[str, str | None] = {}
    for i, k in enumerate(ids):
        parent[k] = ids[rng.randrange(i)] if i and rng.random() < 0.75 else None
    deps: dict[str, list[str]] = {k: [] for k in ids}
    for i, k in enumerate(ids):
        for j in range(i):
            other = ids[j]
            if parent[other] == parent[k] and rng.random() < 0.4:
                deps[k].append(other)
    nodes = [
        TaskNode(task_id=k, label=rng.choice(labels), parent=parent[k], depends_on=tuple(deps[k]))
        for k in ids
    ]
    return TaskFlowGraph.build(nodes)


# expressions: shunting-yard --------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_OPEN = {"(": ")", "[": "]", "{": "}"}


def shunting_yard_eval(text: str, snippets: dict[str, Decimal] | None = None) -> Decimal:
    """Evaluate via an explicit operator stack (NL snippets looked up verbatim)."""
    tokens: list[object] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < len(text) and (text[j].isdigit() or text[j] == "."):
                j += 1
            tokens.append(Decimal(text[i:j]))
            i = j
        elif ch == "{" and snippets is not None and text[i + 1 : i + 2].strip()[:1].isalpha():
            j = text.index("}", i)
            key = " ".join(text[i + 1 : j].split()).lower()
            tokens.append(snippets[key])
            i = j + 1
        else:
            tokens.append(ch)
            i += 1
    out: list[Decimal] = []
    ops: list[str] = []

    def apply() -> None:
        op = ops.pop()
        r, l = out.pop(), out.pop()
        if op == "+":
            out.append(l + r)
        elif op == "-":
            out.append(l - r)
        elif op == "*":
            out.append(l * r)
        else:
            out.append(l / r)

    for tok in tokens:
        if isinstance(tok, Decimal):
            out.append(tok)
        elif tok in _PREC:
            while ops and ops[-1] in _PREC and _PREC[ops[-1]] >= _PREC[tok]:
                apply()
            ops.append(tok)
        elif tok in _OPEN:
            ops.append(tok)
        else:
            while ops[-1] not in _OPEN:
                apply()
            ops.pop()
    while ops:
        apply()
    (value,) = out
    return value
