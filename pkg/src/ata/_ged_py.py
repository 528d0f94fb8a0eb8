"""Pure-Python branch-and-bound kernel for exact graph edit distance.

Graphs arrive pre-encoded: integer node labels and a flattened ``n*n``
adjacency matrix of edge-type codes (0 = no edge).  Costs are uniform:
``(node_ins, node_del, node_sub, edge_ins, edge_del)``.

The compiled kernel in ``_ged_kernel.pyx`` implements the same search with the
same visiting order; the two must agree on every distance.
"""

from __future__ import annotations

import math
from collections import Counter


def _node_bound(rem_a: Counter, rem_b: Counter, na: int, nb: int, c_ni: float, c_nd: float, c_ns: float) -> float:
    same = sum(min(v, rem_b.get(k, 0)) for k, v in rem_a.items())
    p = na - same
    q = nb - same
    s = min(p, q)
    return min(s * c_ns + (p - s) * c_nd + (q - s) * c_ni, p * c_nd + q * c_ni)


def branch_and_bound(
    la: list[int],
    lb: list[int],
    ca: list[int],
    cb: list[int],
    costs: tuple[float, float, float, float, float],
    upper: float = math.inf,
) -> tuple[float, list[int]]:
    """Return ``(distance, mapping)``; ``mapping[i]`` is the B node for A node ``i`` or -1.

    ``upper`` must be the cost of some valid edit path (or inf); if no mapping
    beats it strictly, the result is ``(upper, [])``.
    """
    c_ni, c_nd, c_ns, c_ei, c_ed = costs
    m, n = len(la), len(lb)

    def a_edge(u: int, v: int) -> int:
        return ca[u * m + v]

    def b_edge(x: int, y: int) -> int:
        return cb[x * n + y]

    degree = [sum(1 for v in range(m) if a_edge(u, v)) + sum(1 for v in range(m) if a_edge(v, u)) for u in range(m)]
    order = sorted(range(m), key=lambda u: (-degree[u], u))
    a_edges = [(u, v, a_edge(u, v)) for u in range(m) for v in range(m) if a_edge(u, v)]
    b_edges = [(x, y, b_edge(x, y)) for x in range(n) for y in range(n) if b_edge(x, y)]

    phi = [-2] * m  # -2 unassigned, -1 deleted
    used = [False] * n
    best = [upper, []]

    def lower_bound(k: int) -> float:
        rem_a = Counter(la[order[i]] for i in range(k, m))
        rem_b = Counter(lb[x] for x in range(n) if not used[x])
        h = _node_bound(rem_a, rem_b, m - k, n - sum(used), c_ni, c_nd, c_ns)
        per_code: dict[int, int] = {}
        for u, v, c in a_edges:
            if phi[u] == -2 or phi[v] == -2:
                per_code[c] = per_code.get(c, 0) + 1
        for x, y, c in b_edges:
            if not used[x] or not used[y]:
                per_code[c] = per_code.get(c, 0) - 1
        for diff in per_code.values():
            h += diff * c_ed if diff > 0 else -diff * c_ei
        return h

    def step_cost(u: int, x: int, k: int) -> float:
        if x == -1:
            g = c_nd
        else:
            g = c_ns if la[u] != lb[x] else 0.0
        for i in range(k):
            w = order[i]
            y = phi[w]
            for ea, eb in ((a_edge(u, w), b_edge(x, y) if x >= 0 and y >= 0 else 0),
                           (a_edge(w, u), b_edge(y, x) if x >= 0 and y >= 0 else 0)):
                if ea and ea == eb:
                    continue
                if ea:
                    g += c_ed
                if eb:
                    g += c_ei
        return g

    def finish() -> float:
        g = 0.0
        for x in range(n):
            if not used[x]:
                g += c_ni
        for x, y, _ in b_edges:
            if not used[x] or not used[y]:
                g += c_ei
        return g

    def search(k: int, g: float) -> None:
        if k == m:
            total = g + finish()
            if total < best[0]:
                best[0] = total
                best[1] = [phi[i] for i in range(m)]
            return
        if g + lower_bound(k) >= best[0]:
            return
        u = order[k]
        cands = [x for x in range(n) if not used[x] and lb[x] == la[u]]
        cands += [x for x in range(n) if not used[x] and lb[x] != la[u]]
        cands.append(-1)
        for x in cands:
            step = step_cost(u, x, k)
            if g + step >= best[0]:
                continue
            phi[u] = x
            if x >= 0:
                used[x] = True
            search(k + 1, g + step)
            if x >= 0:
                used[x] = False
            phi[u] = -2

    search(0, 0.0)
    return best[0], best[1]
