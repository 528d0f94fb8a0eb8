# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled branch-and-bound kernel for exact graph edit distance.

Same contract and visiting order as ``ata._ged_py.branch_and_bound``.
"""

from libc.stdlib cimport malloc, free, calloc

import math


cdef struct Ctx:
    int m
    int n
    int nlab
    int *la
    int *lb
    int *ca
    int *cb
    int *order
    int *phi
    int *used
    int *cnt_a
    int *cnt_b
    int *code_diff
    int ncodes
    double c_ni, c_nd, c_ns, c_ei, c_ed
    double best
    int *best_phi
    int found


cdef double lower_bound(Ctx *c, int k) nogil:
    cdef int i, x, y, u, v, same, p, q, s, diff, na, nb
    cdef double h, alt
    for i in range(c.nlab):
        c.cnt_a[i] = 0
        c.cnt_b[i] = 0
    for i in range(k, c.m):
        c.cnt_a[c.la[c.order[i]]] += 1
    nb = 0
    for x in range(c.n):
        if not c.used[x]:
            c.cnt_b[c.lb[x]] += 1
            nb += 1
    na = c.m - k
    same = 0
    for i in range(c.nlab):
        same += c.cnt_a[i] if c.cnt_a[i] < c.cnt_b[i] else c.cnt_b[i]
    p = na - same
    q = nb - same
    s = p if p < q else q
    h = s * c.c_ns + (p - s) * c.c_nd + (q - s) * c.c_ni
    alt = p * c.c_nd + q * c.c_ni
    if alt < h:
        h = alt
    for i in range(c.ncodes):
        c.code_diff[i] = 0
    for u in range(c.m):
        for v in range(c.m):
            if c.ca[u * c.m + v] and (c.phi[u] == -2 or c.phi[v] == -2):
                c.code_diff[c.ca[u * c.m + v]] += 1
    for x in range(c.n):
        for y in range(c.n):
            if c.cb[x * c.n + y] and (not c.used[x] or not c.used[y]):
                c.code_diff[c.cb[x * c.n + y]] -= 1
    for i in range(c.ncodes):
        diff = c.code_diff[i]
        if diff > 0:
            h += diff * c.c_ed
        elif diff < 0:
            h -= diff * c.c_ei
    return h


cdef double step_cost(Ctx *c, int u, int x, int k) nogil:
    cdef double g
    cdef int i, w, y, ea, eb
    if x == -1:
        g = c.c_nd
    elif c.la[u] != c.lb[x]:
        g = c.c_ns
    else:
        g = 0.0
    for i in range(k):
        w = c.order[i]
        y = c.phi[w]
        # u -> w
        ea = c.ca[u * c.m + w]
        eb = c.cb[x * c.n + y] if (x >= 0 and y >= 0) else 0
        if not (ea and ea == eb):
            if ea:
                g += c.c_ed
            if eb:
                g += c.c_ei
        # w -> u
        ea = c.ca[w * c.m + u]
        eb = c.cb[y * c.n + x] if (x >= 0 and y >= 0) else 0
        if not (ea and ea == eb):
            if ea:
                g += c.c_ed
            if eb:
                g += c.c_ei
    return g


cdef double finish(Ctx *c) nogil:
    cdef double g = 0.0
    cdef int x, y
    for x in range(c.n):
        if not c.used[x]:
            g += c.c_ni
    for x in range(c.n):
        for y in range(c.n):
            if c.cb[x * c.n + y] and (not c.used[x] or not c.used[y]):
                g += c.c_ei
    return g


cdef void search(Ctx *c, int k, double g) nogil:
    cdef int u, x, i, pass_
    cdef double step, total
    if k == c.m:
        total = g + finish(c)
        if total < c.best:
            c.best = total
            c.found = 1
            for i in range(c.m):
                c.best_phi[i] = c.phi[i]
        return
    if g + lower_bound(c, k) >= c.best:
        return
    u = c.order[k]
    for pass_ in range(3):
        if pass_ == 2:
            step = step_cost(c, u, -1, k)
            if g + step < c.best:
                c.phi[u] = -1
                search(c, k + 1, g + step)
                c.phi[u] = -2
            continue
        for x in range(c.n):
            if c.used[x]:
                continue
            if (pass_ == 0) != (c.lb[x] == c.la[u]):
                continue
            step = step_cost(c, u, x, k)
            if g + step >= c.best:
                continue
            c.phi[u] = x
            c.used[x] = 1
            search(c, k + 1, g + step)
            c.used[x] = 0
            c.phi[u] = -2


def branch_and_bound(la, lb, ca, cb, costs, double upper=math.inf):
    """Return ``(distance, mapping)``; see ``ata._ged_py.branch_and_bound``."""
    cdef Ctx c
    cdef int m = len(la)
    cdef int n = len(lb)
    cdef int i, u, v, nlab, ncodes
    c.m = m
    c.n = n
    nlab = 1 + max(list(la) + list(lb) + [0])
    ncodes = 1 + max(list(ca) + list(cb) + [0])
    c.nlab = nlab
    c.ncodes = ncodes
    c.c_ni, c.c_nd, c.c_ns, c.c_ei, c.c_ed = costs
    c.best = upper
    c.found = 0
    c.la = <int *> malloc((m + 1) * sizeof(int))
    c.lb = <int *> malloc((n + 1) * sizeof(int))
    c.ca = <int *> malloc((m * m + 1) * sizeof(int))
    c.cb = <int *> malloc((n * n + 1) * sizeof(int))
    c.order = <int *> malloc((m + 1) * sizeof(int))
    c.phi = <int *> malloc((m + 1) * sizeof(int))
    c.best_phi = <int *> malloc((m + 1) * sizeof(int))
    c.used = <int *> calloc(n + 1, sizeof(int))
    c.cnt_a = <int *> malloc(nlab * sizeof(int))
    c.cnt_b = <int *> malloc(nlab * sizeof(int))
    c.code_diff = <int *> malloc(ncodes * sizeof(int))
    try:
        for i in range(m):
            c.la[i] = la[i]
            c.phi[i] = -2
        for i in range(n):
            c.lb[i] = lb[i]
        for i in range(m * m):
            c.ca[i] = ca[i]
        for i in range(n * n):
            c.cb[i] = cb[i]
        degree = [0] * m
        for u in range(m):
            for v in range(m):
                if c.ca[u * m + v]:
                    degree[u] += 1
                    degree[v] += 1
        for i, u in enumerate(sorted(range(m), key=lambda w: (-degree[w], w))):
            c.order[i] = u
        with nogil:
            search(&c, 0, 0.0)
        mapping = [c.best_phi[i] for i in range(m)] if c.found else []
        return c.best, mapping
    finally:
        free(c.la)
        free(c.lb)
        free(c.ca)
        free(c.cb)
        free(c.order)
        free(c.phi)
        free(c.best_phi)
        free(c.used)
        free(c.cnt_a)
        free(c.cnt_b)
        free(c.code_diff)
