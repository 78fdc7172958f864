# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: assignment, transportation simplex, interaction sums.

Pure-Python equivalents live in ``_fallback.py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY, fabs

cnp.import_array()

cdef long long DEGENERATE_SWITCH = 50


def lsap(cost):
    """Minimum-cost perfect assignment (shortest augmenting path). Returns col4row."""
    cdef const double[:, ::1] C = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = C.shape[0]
    if C.shape[1] != n:
        raise ValueError("lsap expects a square matrix")
    u_arr = np.zeros(n)
    v_arr = np.zeros(n)
    spc_arr = np.empty(n)
    path_arr = np.empty(n, dtype=np.int64)
    col_arr = np.full(n, -1, dtype=np.int64)
    row_arr = np.full(n, -1, dtype=np.int64)
    sr_arr = np.empty(n, dtype=np.int64)
    sc_arr = np.empty(n, dtype=np.uint8)
    rem_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] spc = spc_arr
    cdef long long[::1] path = path_arr
    cdef long long[::1] col4row = col_arr
    cdef long long[::1] row4col = row_arr
    cdef long long[::1] sr = sr_arr
    cdef unsigned char[::1] in_sc = sc_arr
    cdef long long[::1] remaining = rem_arr
    cdef Py_ssize_t cur, i, j, it, k, n_rem, n_sr, index, sink
    cdef double min_val, lowest, r
    for cur in range(n):
        for j in range(n):
            spc[j] = INFINITY
            path[j] = -1
            in_sc[j] = 0
            remaining[j] = n - 1 - j
        n_rem = n
        n_sr = 0
        min_val = 0.0
        i = cur
        sink = -1
        while sink < 0:
            sr[n_sr] = i
            n_sr += 1
            index = -1
            lowest = INFINITY
            for it in range(n_rem):
                j = remaining[it]
                r = min_val + C[i, j] - u[i] - v[j]
                if r < spc[j]:
                    path[j] = i
                    spc[j] = r
                if spc[j] < lowest or (spc[j] == lowest and row4col[j] < 0):
                    lowest = spc[j]
                    index = it
            if index < 0 or lowest == INFINITY:
                raise ValueError("infeasible assignment problem")
            min_val = lowest
            j = remaining[index]
            if row4col[j] < 0:
                sink = j
            else:
                i = row4col[j]
            in_sc[j] = 1
            n_rem -= 1
            remaining[index] = remaining[n_rem]
        u[cur] += min_val
        for k in range(n_sr):
            i = sr[k]
            if i != cur:
                u[i] += min_val - spc[col4row[i]]
        for j in range(n):
            if in_sc[j]:
                v[j] -= min_val - spc[j]
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            k = col4row[i]
            col4row[i] = j
            j = k
            if i == cur:
                break
    return col_arr


cdef int _tree_walk(Py_ssize_t m, Py_ssize_t n, long long[::1] br, long long[::1] bc,
                    const double[:, ::1] C, double[::1] u, double[::1] v,
                    long long[::1] parent, long long[::1] pedge, long long[::1] depth,
                    long long[::1] head, long long[::1] nxt, long long[::1] to,
                    long long[::1] eid, long long[::1] queue):
    """Duals and rooted-tree structure of the current basis. Returns 0 on success."""
    cdef Py_ssize_t nn = m + n, nb = m + n - 1, k, a, c, node, nbr, qh, qt, e
    for k in range(nn):
        head[k] = -1
        depth[k] = -1
        parent[k] = -1
        pedge[k] = -1
    e = 0
    for k in range(nb):
        a = br[k]
        c = m + bc[k]
        to[e] = c; eid[e] = k; nxt[e] = head[a]; head[a] = e; e += 1
        to[e] = a; eid[e] = k; nxt[e] = head[c]; head[c] = e; e += 1
    depth[0] = 0
    u[0] = 0.0
    queue[0] = 0
    qh = 0
    qt = 1
    while qh < qt:
        node = queue[qh]
        qh += 1
        e = head[node]
        while e >= 0:
            nbr = to[e]
            if depth[nbr] < 0:
                depth[nbr] = depth[node] + 1
                parent[nbr] = node
                pedge[nbr] = eid[e]
                if node < m:
                    v[nbr - m] = C[node, nbr - m] - u[node]
                else:
                    u[nbr] = C[nbr, node - m] - v[node - m]
                queue[qt] = nbr
                qt += 1
            e = nxt[e]
    return 0 if qt == nn else -1


def transport_simplex(a, b, cost, long long max_iter=0):
    """Exact transportation problem by network simplex. Returns (rows, cols, flows)."""
    cdef double[::1] sa = np.array(a, dtype=np.float64)
    cdef double[::1] sb = np.array(b, dtype=np.float64)
    cdef const double[:, ::1] C = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t m = C.shape[0], n = C.shape[1]
    cdef Py_ssize_t nb = m + n - 1, nn = m + n
    if max_iter <= 0:
        max_iter = 50 * m * n + 1000
    br_arr = np.empty(nb, dtype=np.int64)
    bc_arr = np.empty(nb, dtype=np.int64)
    fl_arr = np.empty(nb, dtype=np.float64)
    cdef long long[::1] br = br_arr
    cdef long long[::1] bc = bc_arr
    cdef double[::1] fl = fl_arr
    cdef double[::1] u = np.zeros(m)
    cdef double[::1] v = np.zeros(n)
    cdef long long[::1] parent = np.empty(nn, dtype=np.int64)
    cdef long long[::1] pedge = np.empty(nn, dtype=np.int64)
    cdef long long[::1] depth = np.empty(nn, dtype=np.int64)
    cdef long long[::1] head = np.empty(nn, dtype=np.int64)
    cdef long long[::1] nxt = np.empty(2 * nb, dtype=np.int64)
    cdef long long[::1] to = np.empty(2 * nb, dtype=np.int64)
    cdef long long[::1] eid = np.empty(2 * nb, dtype=np.int64)
    cdef long long[::1] queue = np.empty(nn, dtype=np.int64)
    cdef long long[::1] cyc = np.empty(nn, dtype=np.int64)
    cdef long long[::1] upy = np.empty(nn, dtype=np.int64)
    cdef Py_ssize_t i = 0, j = 0, k = 0, cnt = 0, ncyc, nupy, ei, ej, xn, yn, leave, bi, bj
    cdef double x, eps, best, red, theta, cmax = 0.0
    cdef long long it, degenerate_run = 0, vidx, best_vidx
    cdef bint found, converged = False
    for i in range(m):
        for j in range(n):
            if fabs(C[i, j]) > cmax:
                cmax = fabs(C[i, j])
    eps = 1e-13 * (1.0 + cmax)
    i = 0
    j = 0
    while True:
        x = sa[i] if sa[i] < sb[j] else sb[j]
        br[cnt] = i
        bc[cnt] = j
        fl[cnt] = x if x > 0.0 else 0.0
        cnt += 1
        sa[i] -= x
        sb[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and sa[i] <= sb[j]):
            i += 1
        else:
            j += 1
    for it in range(max_iter):
        if _tree_walk(m, n, br, bc, C, u, v, parent, pedge, depth, head, nxt, to, eid, queue) != 0:
            raise RuntimeError("basis is not a spanning tree")
        found = False
        ei = 0
        ej = 0
        if degenerate_run < DEGENERATE_SWITCH:
            best = -eps
            for bi in range(m):
                for bj in range(n):
                    red = C[bi, bj] - u[bi] - v[bj]
                    if red < best:
                        best = red
                        ei = bi
                        ej = bj
                        found = True
        else:
            for bi in range(m):
                for bj in range(n):
                    if C[bi, bj] - u[bi] - v[bj] < -eps:
                        ei = bi
                        ej = bj
                        found = True
                        break
                if found:
                    break
        if not found:
            converged = True
            break
        xn = m + ej
        yn = ei
        ncyc = 0
        nupy = 0
        while xn != yn:
            if depth[xn] >= depth[yn]:
                cyc[ncyc] = pedge[xn]
                ncyc += 1
                xn = parent[xn]
            else:
                upy[nupy] = pedge[yn]
                nupy += 1
                yn = parent[yn]
        for k in range(nupy):
            cyc[ncyc] = upy[nupy - 1 - k]
            ncyc += 1
        theta = INFINITY
        for k in range(0, ncyc, 2):
            if fl[cyc[k]] < theta:
                theta = fl[cyc[k]]
        leave = -1
        best_vidx = -1
        for k in range(0, ncyc, 2):
            if fl[cyc[k]] == theta:
                if degenerate_run < DEGENERATE_SWITCH:
                    leave = cyc[k]
                    break
                vidx = br[cyc[k]] * n + bc[cyc[k]]
                if leave < 0 or vidx < best_vidx:
                    leave = cyc[k]
                    best_vidx = vidx
        for k in range(1, ncyc, 2):
            fl[cyc[k]] += theta
        for k in range(0, ncyc, 2):
            fl[cyc[k]] -= theta
            if fl[cyc[k]] < 0.0:
                fl[cyc[k]] = 0.0
        br[leave] = ei
        bc[leave] = ej
        fl[leave] = theta
        if theta == 0.0:
            degenerate_run += 1
        else:
            degenerate_run = 0
    if not converged:
        raise RuntimeError("network simplex did not converge")
    keep = fl_arr > 1e-15
    return br_arr[keep].copy(), bc_arr[keep].copy(), fl_arr[keep].copy()


def interaction_sum(x, y, w, int kernel):
    """out[i] = sum_j w[j] k(x[i] - y[j]); kernel 0 none, 1 linear, 2 z/(1+|z|)."""
    cdef const double[:, ::1] X = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] Y = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t nx = X.shape[0], ny = Y.shape[0], d = X.shape[1], i, j, k
    out_arr = np.zeros((nx, d))
    cdef double[:, ::1] out = out_arr
    cdef double z[64]
    cdef double nrm, scale
    if kernel == 0:
        return out_arr
    if d > 64:
        raise ValueError("interaction_sum supports dim <= 64")
    for i in range(nx):
        for j in range(ny):
            nrm = 0.0
            for k in range(d):
                z[k] = X[i, k] - Y[j, k]
                nrm = nrm + z[k] * z[k]
            if kernel == 2:
                scale = 1.0 + sqrt(nrm)
                for k in range(d):
                    out[i, k] += W[j] * (z[k] / scale)
            else:
                for k in range(d):
                    out[i, k] += W[j] * z[k]
    return out_arr
