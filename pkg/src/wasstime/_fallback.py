"""Pure Python/NumPy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and results match the compiled module; only speed differs. The
backend is chosen in :mod:`wasstime._backend`.
"""
from __future__ import annotations

import numpy as np

KERNEL_NONE = 0
KERNEL_LINEAR = 1
KERNEL_BOUNDED = 2

_DEGENERATE_SWITCH = 50


def lsap(cost):
    """Minimum-cost perfect assignment for a square cost matrix.

    Shortest augmenting path method (Jonker-Volgenant family) with dual
    potentials. Returns ``col4row`` such that row ``i`` is matched to column
    ``col4row[i]``.
    """
    C = np.ascontiguousarray(cost, dtype=np.float64)
    n, m = C.shape
    if n != m:
        raise ValueError("lsap expects a square matrix")
    u = np.zeros(n)
    v = np.zeros(n)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)
    for cur in range(n):
        spc = np.full(n, np.inf)
        path = np.full(n, -1, dtype=np.int64)
        in_sc = np.zeros(n, dtype=bool)
        visited_rows = []
        min_val = 0.0
        i = cur
        sink = -1
        while sink < 0:
            visited_rows.append(i)
            remaining = ~in_sc
            r = min_val + C[i] - u[i] - v
            improve = remaining & (r < spc)
            spc[improve] = r[improve]
            path[improve] = i
            # lowest remaining reduced distance; prefer an unassigned column on ties
            cand = np.where(remaining, spc, np.inf)
            lowest = cand.min()
            if not np.isfinite(lowest):
                raise ValueError("infeasible assignment problem")
            ties = np.flatnonzero(cand == lowest)
            free = ties[row4col[ties] < 0]
            j = int(free[0]) if free.size else int(ties[0])
            min_val = lowest
            in_sc[j] = True
            if row4col[j] < 0:
                sink = j
            else:
                i = int(row4col[j])
        u[cur] += min_val
        for i in visited_rows:
            if i != cur:
                u[i] += min_val - spc[col4row[i]]
        v[in_sc] -= min_val - spc[in_sc]
        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, int(col4row[i])
            if i == cur:
                break
    return col4row


def _tree_walk(m, n, br, bc, C):
    """BFS over the basis tree; returns duals, parent node, parent edge, depth."""
    nn = m + n
    adj = [[] for _ in range(nn)]
    for k in range(len(br)):
        r, c = br[k], m + bc[k]
        adj[r].append((c, k))
        adj[c].append((r, k))
    u = np.zeros(m)
    v = np.zeros(n)
    parent = np.full(nn, -1, dtype=np.int64)
    pedge = np.full(nn, -1, dtype=np.int64)
    depth = np.full(nn, -1, dtype=np.int64)
    depth[0] = 0
    queue = [0]
    head = 0
    while head < len(queue):
        node = queue[head]
        head += 1
        for nb, k in adj[node]:
            if depth[nb] >= 0:
                continue
            depth[nb] = depth[node] + 1
            parent[nb] = node
            pedge[nb] = k
            if node < m:
                v[nb - m] = C[node, nb - m] - u[node]
            else:
                u[nb] = C[nb, node - m] - v[node - m]
            queue.append(nb)
    if head != nn:
        raise RuntimeError("basis is not a spanning tree")
    return u, v, parent, pedge, depth


def transport_simplex(a, b, cost, max_iter=0):
    """Exact transportation problem via the network simplex on the bipartite graph.

    Parameters
    ----------
    a, b : arrays of supplies and demands with (numerically) equal totals.
    cost : (m, n) cost matrix.
    max_iter : pivot cap; 0 means ``50 * m * n + 1000``.

    Returns
    -------
    rows, cols, flows : arrays describing the positive-flow cells.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    C = np.ascontiguousarray(cost, dtype=np.float64)
    m, n = C.shape
    if max_iter <= 0:
        max_iter = 50 * m * n + 1000
    # north-west corner start: m + n - 1 basic cells, degenerate ones carry 0
    br, bc, fl = [], [], []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        br.append(i)
        bc.append(j)
        fl.append(max(x, 0.0))
        ra[i] -= x
        rb[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    br = np.array(br, dtype=np.int64)
    bc = np.array(bc, dtype=np.int64)
    fl = np.array(fl, dtype=np.float64)
    eps = 1e-13 * (1.0 + float(np.abs(C).max()))
    degenerate_run = 0
    for _ in range(max_iter):
        u, v, parent, pedge, depth = _tree_walk(m, n, br, bc, C)
        red = C - u[:, None] - v[None, :]
        if degenerate_run < _DEGENERATE_SWITCH:
            flat = int(np.argmin(red))
            if red.flat[flat] >= -eps:
                break
        else:
            neg = np.flatnonzero(red.ravel() < -eps)
            if neg.size == 0:
                break
            flat = int(neg[0])
        ei, ej = divmod(flat, n)
        # tree path from column node back to row node, through their common ancestor
        x_node, y_node = m + ej, ei
        up_x, up_y = [], []
        while x_node != y_node:
            if depth[x_node] >= depth[y_node]:
                up_x.append(int(pedge[x_node]))
                x_node = int(parent[x_node])
            else:
                up_y.append(int(pedge[y_node]))
                y_node = int(parent[y_node])
        cycle = up_x + up_y[::-1]
        minus = cycle[0::2]
        plus = cycle[1::2]
        theta = min(fl[k] for k in minus)
        if degenerate_run < _DEGENERATE_SWITCH:
            leave = next(k for k in minus if fl[k] == theta)
        else:
            leave = min((k for k in minus if fl[k] == theta), key=lambda k: br[k] * n + bc[k])
        for k in plus:
            fl[k] += theta
        for k in minus:
            fl[k] = max(fl[k] - theta, 0.0)
        br[leave], bc[leave], fl[leave] = ei, ej, theta
        degenerate_run = degenerate_run + 1 if theta == 0.0 else 0
    else:
        raise RuntimeError("network simplex did not converge")
    keep = fl > 1e-15
    return br[keep].copy(), bc[keep].copy(), fl[keep].copy()


def interaction_sum(x, y, w, kernel):
    """``out[i] = sum_j w[j] * k(x[i] - y[j])`` for the kernel code ``kernel``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if kernel == KERNEL_NONE:
        return np.zeros_like(x)
    out = np.zeros_like(x)
    for j in range(y.shape[0]):
        z = x - y[j]
        if kernel == KERNEL_BOUNDED:
            z = z / (1.0 + np.sqrt(np.einsum("ij,ij->i", z, z)))[:, None]
        out += w[j] * z
    return out
