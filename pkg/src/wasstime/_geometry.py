"""Exact projections onto small convex sets used by the dynamics and target modules."""
from __future__ import annotations

import itertools

import numpy as np


def min_norm_point(P: np.ndarray, tol: float = 1e-13, max_iter: int = 1000):
    """Point of ``conv(P)`` closest to the origin (Wolfe's algorithm).

    Returns ``(x, lam)`` with ``x = lam @ P`` and ``lam`` barycentric weights.
    """
    P = np.asarray(P, dtype=float)
    k = P.shape[0]
    scale = max(1.0, float(np.max(np.einsum("ij,ij->i", P, P))))
    j = int(np.argmin(np.einsum("ij,ij->i", P, P)))
    S = [j]
    lam = np.array([1.0])
    x = P[j].copy()
    for _ in range(max_iter):
        g = P @ x
        jn = int(np.argmin(g))
        if x @ x - g[jn] <= tol * scale or jn in S:
            break
        S.append(jn)
        lam = np.append(lam, 0.0)
        while True:
            A = P[S]
            s = len(S)
            M = np.zeros((s + 1, s + 1))
            M[:s, :s] = A @ A.T
            M[:s, s] = 1.0
            M[s, :s] = 1.0
            rhs = np.zeros(s + 1)
            rhs[s] = 1.0
            a = np.linalg.lstsq(M, rhs, rcond=None)[0][:s]
            if np.all(a > 1e-14):
                lam = a
                x = lam @ A
                break
            mask = (a <= 1e-14) & (lam - a > 0)
            theta = float(np.min(lam[mask] / (lam[mask] - a[mask]))) if mask.any() else 1.0
            lam = lam + theta * (a - lam)
            keep = lam > 1e-14
            S = [S[i] for i in range(s) if keep[i]]
            lam = lam[keep]
            lam = lam / lam.sum()
            x = lam @ P[S]
    full = np.zeros(k)
    full[S] = lam
    return x, full


def project_hull(V: np.ndarray, w: np.ndarray):
    """Euclidean projection of ``w`` onto ``conv(V)``; returns ``(proj, lam)``."""
    x, lam = min_norm_point(np.asarray(V, dtype=float) - np.asarray(w, dtype=float))
    return x + w, lam


def project_ellipsoid(G: np.ndarray, z: np.ndarray, rho: float, iters: int = 200):
    """Minimize ``|G u - z|`` over ``|u| <= rho``; returns ``u``.

    Constrained least squares solved through the SVD and a monotone
    bisection on the multiplier.
    """
    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    c = U.T @ z
    pos = s > 1e-14 * max(1.0, float(s.max(initial=0.0)))
    u_free = Vt[pos].T @ (c[pos] / s[pos])
    if np.linalg.norm(u_free) <= rho:
        return u_free
    if rho == 0.0:
        return np.zeros(G.shape[1])

    def norm_at(lmb):
        return float(np.linalg.norm(s[pos] * c[pos] / (s[pos] ** 2 + lmb)))

    lo, hi = 0.0, max(1.0, float(np.linalg.norm(s[pos] * c[pos])) / rho)
    while norm_at(hi) > rho:
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if norm_at(mid) > rho:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    u = Vt[pos].T @ (s[pos] * c[pos] / (s[pos] ** 2 + hi))
    n = np.linalg.norm(u)
    return u * (rho / n) if n > rho else u


def project_polyhedron(A: np.ndarray, b: np.ndarray, x: np.ndarray, tol: float = 1e-10):
    """Projection onto ``{y : A y <= b}`` by enumerating KKT active sets.

    Exact for the small constraint counts used by classical targets. Returns
    ``None`` when no feasible KKT point exists (empty set).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    m, d = A.shape
    if np.all(A @ x <= b + tol):
        return x.copy()
    scale = 1.0 + np.abs(b).max(initial=0.0) + np.abs(x).max(initial=0.0)
    best = None
    for size in range(1, min(m, d) + 1):
        for act in itertools.combinations(range(m), size):
            Aa = A[list(act)]
            G = Aa @ Aa.T
            if np.linalg.matrix_rank(G) < size:
                continue
            mult = np.linalg.solve(G, Aa @ x - b[list(act)])
            if np.any(mult < -tol):
                continue
            y = x - Aa.T @ mult
            if np.all(A @ y <= b + tol * scale):
                dist = float(np.linalg.norm(y - x))
                if best is None or dist < best[0]:
                    best = (dist, y)
        if best is not None:
            return best[1]
    return None
