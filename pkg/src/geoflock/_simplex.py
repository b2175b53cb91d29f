"""Exact transportation simplex for small dense problems.

Solves  min sum_ij C[i,j] X[i,j]  s.t.  X 1 = supply, X^T 1 = demand, X >= 0
with a tree-basis primal simplex.  The entering arc is chosen by the most
negative reduced cost; during degenerate stalls the rule switches to Bland's
(smallest index enters, smallest index leaves among ties), which prevents
cycling on the heavily degenerate bases a northwest-corner start produces.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import NumericalError

_REDUCED_COST_TOL = 1e-12
_DEGENERATE_FLOW = 1e-15
_STALL_LIMIT = 40  # consecutive degenerate pivots before switching to Bland


def _northwest_corner(supply, demand):
    m, n = len(supply), len(demand)
    a = supply.copy()
    b = demand.copy()
    basis = []
    flows = {}
    i = j = 0
    while len(basis) < m + n - 1:
        q = min(a[i], b[j])
        basis.append((i, j))
        flows[(i, j)] = q
        a[i] -= q
        b[j] -= q
        if i == m - 1 and j == n - 1:
            break
        # on ties advance only one index so the basis stays a spanning tree
        if (a[i] <= b[j] and i < m - 1) or j == n - 1:
            i += 1
        else:
            j += 1
    return basis, flows


def _potentials(basis, cost, m, n):
    pot = np.full(m + n, np.nan)
    adj = [[] for _ in range(m + n)]
    for (i, j) in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    pot[0] = 0.0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if np.isnan(pot[v]):
                i, j = (u, v - m) if u < m else (v, u - m)
                pot[v] = cost[i, j] - pot[u]
                queue.append(v)
    return pot, adj


def _tree_path(adj, start, goal):
    parent = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            break
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path  # goal .. start


def solve_transport(cost: np.ndarray, supply: np.ndarray, demand: np.ndarray):
    """Optimal flows for a balanced transportation problem.

    Returns (rows, cols, flows) arrays describing the optimal basic solution
    (zero flows of degenerate basic arcs are dropped).
    """
    cost = np.asarray(cost, dtype=float)
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    m, n = cost.shape
    if m == 1 or n == 1:
        # a single row or column forces the whole plan
        ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        flows = supply[:, None] * demand[None, :] / supply.sum()
        return ii.ravel(), jj.ravel(), flows.ravel()

    basis, flows = _northwest_corner(supply, demand)
    basis_set = set(basis)
    max_pivots = max(100_000, 100 * m * n)
    stall = 0
    for _ in range(max_pivots):
        pot, adj = _potentials(basis, cost, m, n)
        reduced = cost - pot[:m][:, None] - pot[m:][None, :]
        for (i, j) in basis:
            reduced[i, j] = 0.0
        if stall >= _STALL_LIMIT:
            viol = reduced.ravel() < -_REDUCED_COST_TOL
            if not viol.any():
                break
            flat = int(np.argmax(viol))  # smallest flat index: Bland's rule
        else:
            flat = int(np.argmin(reduced.ravel()))
            if reduced.ravel()[flat] >= -_REDUCED_COST_TOL:
                break
        ei, ej = divmod(flat, n)
        # cycle: entering arc + the tree path from source ei to sink ej
        path = _tree_path(adj, ei, m + ej)[::-1]  # ei .. m+ej
        cycle_arcs = []
        for a, b in zip(path[:-1], path[1:]):
            i, j = (a, b - m) if a < m else (b, a - m)
            cycle_arcs.append((i, j))
        minus_arcs = cycle_arcs[0::2]  # alternate signs, first path arc is negative
        theta = min(flows[arc] for arc in minus_arcs)
        leave = min(arc for arc in minus_arcs if flows[arc] == theta)
        if theta > _DEGENERATE_FLOW:
            for k, arc in enumerate(cycle_arcs):
                flows[arc] += -theta if k % 2 == 0 else theta
            stall = 0
        else:
            stall += 1  # pure basis exchange
        flows[(ei, ej)] = theta if theta > _DEGENERATE_FLOW else 0.0
        basis_set.remove(leave)
        basis_set.add((ei, ej))
        del flows[leave]
        basis = sorted(basis_set)
    else:
        raise NumericalError("transportation simplex exceeded its pivot cap")

    rows, cols, out = [], [], []
    for (i, j), q in sorted(flows.items()):
        if q > 0.0:
            rows.append(i)
            cols.append(j)
            out.append(q)
    return np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(out, dtype=float)
