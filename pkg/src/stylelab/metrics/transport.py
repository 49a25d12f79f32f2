"""Exact optimal transport (transportation simplex) and the EMD family.

Covers the style-distribution Earth-Mover's Distance, its direction-corrected
variant, and Word Mover's Distance / Similarity over embedding tables.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from ..errors import ContractError, MetricUndefinedError

_NORM_TOL = 1e-9
_RC_TOL = 1e-12


def transport(a, b, cost, max_iter=100_000):
    """Minimum-cost plan moving mass ``a`` (m,) onto ``b`` (n,).

    Uses the transportation simplex: a north-west-corner basic solution
    refined with u-v potentials until no reduced cost is negative. The two
    marginals must carry equal total mass. Returns ``(total_cost, plan)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cost = np.asarray(cost, dtype=np.float64)
    if cost.shape != (a.size, b.size):
        raise ContractError(f"cost matrix shape {cost.shape} does not match marginals {a.size}x{b.size}")
    if (a < 0).any() or (b < 0).any():
        raise ContractError("marginals must be non-negative")
    if abs(a.sum() - b.sum()) > _NORM_TOL * max(1.0, a.sum()):
        raise ContractError("marginals must carry equal mass")
    plan = np.zeros(cost.shape)
    rows = np.flatnonzero(a > 0)
    cols = np.flatnonzero(b > 0)
    if rows.size == 0 or cols.size == 0:
        return 0.0, plan
    sub = _simplex(a[rows], b[cols], cost[np.ix_(rows, cols)], max_iter)
    plan[np.ix_(rows, cols)] = sub
    return float(np.sum(plan * cost)), plan


def _simplex(a, b, c, max_iter):
    m, n = c.shape
    a = a.copy()
    b = b * (a.sum() / b.sum())
    flow = np.zeros((m, n))
    basis = []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        flow[i, j] = x
        basis.append((i, j))
        ra[i] -= x
        rb[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    in_basis = np.zeros((m, n), dtype=bool)
    for cell in basis:
        in_basis[cell] = True

    for _ in range(max_iter):
        u, v = _potentials(basis, c, m, n)
        reduced = c - u[:, None] - v[None, :]
        reduced[in_basis] = 0.0
        k = int(np.argmin(reduced))
        ei, ej = divmod(k, n)
        if reduced[ei, ej] >= -_RC_TOL * max(1.0, np.abs(c).max()):
            break
        cycle = _cycle(basis, m, ei, ej)
        minus = cycle[1::2]
        theta_idx = min(range(len(minus)), key=lambda q: (flow[minus[q]], q))
        theta = flow[minus[theta_idx]]
        for q, cell in enumerate(cycle):
            flow[cell] += theta if q % 2 == 0 else -theta
        leaving = minus[theta_idx]
        flow[leaving] = 0.0
        basis.remove(leaving)
        in_basis[leaving] = False
        basis.append((ei, ej))
        in_basis[ei, ej] = True
    np.maximum(flow, 0.0, out=flow)
    return flow


def _potentials(basis, c, m, n):
    """Solve u_i + v_j = c_ij on the spanning tree of basic cells."""
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    adj_r = [[] for _ in range(m)]
    adj_c = [[] for _ in range(n)]
    for i, j in basis:
        adj_r[i].append(j)
        adj_c[j].append(i)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for j in adj_r[idx]:
                if np.isnan(v[j]):
                    v[j] = c[idx, j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in adj_c[idx]:
                if np.isnan(u[i]):
                    u[i] = c[i, idx] - v[idx]
                    stack.append(("r", i))
    return u, v


def _cycle(basis, m, ei, ej):
    """Cells of the pivot cycle starting at entering cell (ei, ej), alternating +/-.

    Nodes 0..m-1 are rows, m.. are columns; the tree path runs from column
    ej back to row ei.
    """
    adj = {}
    for i, j in basis:
        adj.setdefault(i, []).append(m + j)
        adj.setdefault(m + j, []).append(i)
    start, goal = m + ej, ei
    parent = {start: None}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nb in adj.get(node, ()):
            if nb not in parent:
                parent[nb] = node
                stack.append(nb)
    nodes = []
    node = goal
    while node is not None:
        nodes.append(node)
        node = parent[node]
    nodes.reverse()  # column ej -> ... -> row ei
    cells = [(ei, ej)]
    for x, y in zip(nodes[:-1], nodes[1:]):
        cells.append((x, y - m) if x < m else (y, x - m))
    return cells


def unit_ground(n):
    return 1.0 - np.eye(n)


def _check_distribution(p, name):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ContractError(f"{name} must be a non-empty probability vector")
    if (p < -_NORM_TOL).any() or abs(p.sum() - 1.0) > _NORM_TOL:
        raise ContractError(f"{name} is not normalized (sum={p.sum()!r})")
    return np.clip(p, 0.0, None)


def emd(p, q, ground=None):
    """Earth-Mover's Distance between two distributions over the same classes."""
    p = _check_distribution(p, "p")
    q = _check_distribution(q, "q")
    if p.size != q.size:
        raise ContractError("p and q must have the same length")
    if p.size > 64:
        raise ContractError("emd supports at most 64 classes")
    ground = unit_ground(p.size) if ground is None else np.asarray(ground, dtype=np.float64)
    if ground.shape != (p.size, p.size):
        raise ContractError("ground distance matrix has the wrong shape")
    if not np.allclose(ground, ground.T) or np.any(np.diag(ground) != 0):
        raise ContractError("ground distance matrix must be symmetric with zero diagonal")
    if np.array_equal(p, q):
        return 0.0
    return transport(p, q, ground)[0]


def dc_emd(p_before, p_after, target, ground=None):
    """EMD signed by whether the mass on ``target`` grew (>= counts as growth)."""
    p_before = np.asarray(p_before, dtype=np.float64)
    p_after = np.asarray(p_after, dtype=np.float64)
    if not 0 <= int(target) < p_before.size:
        raise ContractError(f"target class {target} out of range")
    d = emd(p_before, p_after, ground)
    return d if p_after[target] >= p_before[target] else -d


def bow(doc, embeddings):
    """Normalized bag-of-words over in-vocabulary tokens: (words, weights)."""
    counts = Counter(t for t in doc if t in embeddings)
    if not counts:
        raise MetricUndefinedError("document has no in-vocabulary tokens")
    words = sorted(counts)
    weights = np.array([counts[w] for w in words], dtype=np.float64)
    return words, weights / weights.sum()


def wmd(doc_a, doc_b, embeddings):
    """Word Mover's Distance with Euclidean ground costs; OOV tokens are skipped."""
    wa, pa = bow(doc_a, embeddings)
    wb, pb = bow(doc_b, embeddings)
    if wa == wb and np.array_equal(pa, pb):
        return 0.0
    va = np.stack([embeddings[w] for w in wa])
    vb = np.stack([embeddings[w] for w in wb])
    cost = np.sqrt(np.maximum(((va[:, None, :] - vb[None, :, :]) ** 2).sum(-1), 0.0))
    # shared words at identical vectors must cost exactly zero
    for i, w in enumerate(wa):
        if w in wb:
            cost[i, wb.index(w)] = 0.0
    return transport(pa, pb, cost)[0]


def wms(doc_a, doc_b, embeddings):
    return 1.0 / (1.0 + wmd(doc_a, doc_b, embeddings))
