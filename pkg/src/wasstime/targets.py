"""Generalized targets: measures whose integrals against a finite observable family are <= 0."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ._geometry import project_polyhedron
from ._util import row_norms
from .errors import BadParameter, DimensionMismatch, NoClassicalCounterpart, NonConvexFamily, NonFinite
from .measures import DiscreteMeasure, moment_p
from .transport import TransportPlan, interpolate_along_plan, product_plan, wp_distance

BOUNDARY_TOL = 1e-12


# --- classical sets --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HalfspaceSet:
    """``{x : <normal, x> <= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(-1)
        if not np.linalg.norm(n) > 0:
            raise BadParameter("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return self.normal.size

    def distance(self, X):
        nn = np.linalg.norm(self.normal)
        return np.maximum(X @ self.normal - self.offset, 0.0) / nn

    def project(self, X):
        ex = np.maximum(X @ self.normal - self.offset, 0.0) / (self.normal @ self.normal)
        return X - ex[:, None] * self.normal

    def boundary_normal(self, X):
        on = np.abs(X @ self.normal - self.offset) <= BOUNDARY_TOL * (1.0 + abs(self.offset))
        return on[:, None] * (self.normal / np.linalg.norm(self.normal))

    def as_constraints(self):
        return self.normal.reshape(1, -1), np.array([self.offset])

    def to_dict(self):
        return {"kind": "halfspace", "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class BallSet:
    """Closed ball; radius 0 is a single point."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        if not self.radius >= 0:
            raise BadParameter("radius must be >= 0")

    @property
    def dim(self):
        return self.center.size

    def distance(self, X):
        return np.maximum(row_norms(X - self.center) - self.radius, 0.0)

    def project(self, X):
        Z = X - self.center
        n = row_norms(Z)
        fac = np.where(n > self.radius, self.radius / np.where(n > 0, n, 1.0), 1.0)
        return self.center + Z * fac[:, None]

    def boundary_normal(self, X):
        Z = X - self.center
        n = row_norms(Z)
        on = (np.abs(n - self.radius) <= BOUNDARY_TOL * (1.0 + self.radius)) & (n > 0)
        return np.where(on[:, None], Z / np.where(n > 0, n, 1.0)[:, None], 0.0)

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class BoxSet:
    """``{lo <= x <= hi}`` coordinatewise; infinite bounds allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise BadParameter("box needs lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    def distance(self, X):
        return row_norms(X - self.project(X))

    def project(self, X):
        return np.clip(X, self.lo, self.hi)

    def boundary_normal(self, X):
        out = np.zeros_like(X)
        for i, x in enumerate(X):
            up = np.flatnonzero(np.isfinite(self.hi) & (np.abs(x - self.hi) <= BOUNDARY_TOL * (1 + np.abs(self.hi))))
            dn = np.flatnonzero(np.isfinite(self.lo) & (np.abs(x - self.lo) <= BOUNDARY_TOL * (1 + np.abs(self.lo))))
            if up.size and (not dn.size or up[0] <= dn[0]):
                out[i, up[0]] = 1.0
            elif dn.size:
                out[i, dn[0]] = -1.0
        return out

    def as_constraints(self):
        d = self.dim
        rows, rhs = [], []
        for k in range(d):
            if np.isfinite(self.hi[k]):
                rows.append(np.eye(d)[k])
                rhs.append(self.hi[k])
            if np.isfinite(self.lo[k]):
                rows.append(-np.eye(d)[k])
                rhs.append(-self.lo[k])
        return np.array(rows).reshape(-1, d), np.array(rhs)

    def to_dict(self):
        enc = lambda v: [x if np.isfinite(x) else str(x) for x in v.tolist()]  # noqa: E731
        return {"kind": "box", "lo": enc(self.lo), "hi": enc(self.hi)}


@dataclass(frozen=True, eq=False)
class PolytopeSet:
    """``{x : A x <= b}``; projection by KKT active-set enumeration."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise BadParameter("A and b sizes differ")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if A.shape[0] and project_polyhedron(A, b, np.zeros(A.shape[1])) is None:
            raise BadParameter("polytope is empty")

    @property
    def dim(self):
        return self.A.shape[1]

    def project(self, X):
        return np.array([project_polyhedron(self.A, self.b, x) for x in X]).reshape(X.shape)

    def distance(self, X):
        return row_norms(X - self.project(X))

    def boundary_normal(self, X):
        out = np.zeros_like(X)
        for i, x in enumerate(X):
            act = np.flatnonzero(np.abs(self.A @ x - self.b) <= BOUNDARY_TOL * (1 + np.abs(self.b)))
            if act.size:
                a = self.A[act[0]]
                out[i] = a / np.linalg.norm(a)
        return out

    def as_constraints(self):
        return self.A, self.b

    def to_dict(self):
        return {"kind": "polytope", "A": self.A.tolist(), "b": self.b.tolist()}


ClassicalSet = Union[HalfspaceSet, BallSet, BoxSet, PolytopeSet]


def _num(v):
    return float(v) if not isinstance(v, str) else float(v.replace("Infinity", "inf"))


def set_from_dict(record: dict) -> ClassicalSet:
    kind = record.get("kind")
    if kind == "halfspace":
        return HalfspaceSet(record["normal"], record["offset"])
    if kind == "ball":
        return BallSet(record["center"], float(record["radius"]))
    if kind == "box":
        conv = lambda v, default: [default if x is None else _num(x) for x in v]  # noqa: E731
        return BoxSet(conv(record["lo"], -math.inf), conv(record["hi"], math.inf))
    if kind == "polytope":
        return PolytopeSet(record["A"], record["b"])
    raise BadParameter(f"unknown set kind {kind!r}")


def whole_space(dim: int) -> BoxSet:
    return BoxSet(np.full(dim, -math.inf), np.full(dim, math.inf))


def intersect(sets: Sequence[ClassicalSet]) -> ClassicalSet | None:
    """Intersection within the shape library, or ``None`` when it leaves it."""
    sets = [s for s in sets if not (isinstance(s, BoxSet) and np.all(np.isinf(s.lo)) and np.all(np.isinf(s.hi)))]
    if not sets:
        return None
    if len(sets) == 1:
        return sets[0]
    if all(isinstance(s, BoxSet) for s in sets):
        lo = np.max([s.lo for s in sets], axis=0)
        hi = np.min([s.hi for s in sets], axis=0)
        return BoxSet(lo, hi) if np.all(lo <= hi) else None
    if any(isinstance(s, BallSet) for s in sets):
        return None
    parts = [s.as_constraints() for s in sets]
    try:
        return PolytopeSet(np.vstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
    except BadParameter:
        return None


# --- observables -----------------------------------------------------------

NONNEGATIVE, NONPOSITIVE, MIXED = "nonnegative", "nonpositive", "mixed"


class Observable:
    """A generator ``phi`` with a fixed subgradient selection and metadata.

    ``C_phi`` is declared semiconcavity metadata; ``coercive`` is ``(A, C, p)``
    with ``phi(x) >= A |x|^p - C`` or ``None``.
    """

    convex: bool = False
    C_phi: float = 0.0
    coercive: tuple | None = None

    def value(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def subgrad(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sign(self) -> str:
        return MIXED

    def sublevel(self, dim: int) -> ClassicalSet | None:
        return None


@dataclass(eq=False)
class Affine(Observable):
    """``<a, x> + b``."""

    a: np.ndarray
    b: float = 0.0
    C_phi: float = 0.0

    convex = True

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).reshape(-1)

    def value(self, X):
        return X @ self.a + self.b

    def subgrad(self, X):
        return np.tile(self.a, (X.shape[0], 1))

    def sign(self):
        if np.any(self.a != 0):
            return MIXED
        return NONNEGATIVE if self.b >= 0 else NONPOSITIVE

    def sublevel(self, dim):
        if np.any(self.a != 0):
            return HalfspaceSet(self.a, -self.b)
        return whole_space(dim) if self.b <= 0 else None

    def to_dict(self):
        return {"kind": "affine", "a": self.a.tolist(), "b": self.b, "C_phi": self.C_phi}


@dataclass(eq=False)
class DistShifted(Observable):
    """``d_S(x) - alpha``; subgradient ``(x - proj)/d_S`` outside, outward unit normal on the boundary, 0 inside."""

    S: ClassicalSet
    alpha: float = 0.0
    C_phi: float = 0.0
    convex: bool = True

    def __post_init__(self):
        if not self.alpha >= 0:
            raise BadParameter("alpha must be >= 0")

    def value(self, X):
        return self.S.distance(X) - self.alpha

    def subgrad(self, X):
        P = self.S.project(X)
        Z = X - P
        n = row_norms(Z)
        out = np.where((n > 0)[:, None], Z / np.where(n > 0, n, 1.0)[:, None], 0.0)
        inside = n == 0
        if np.any(inside):
            out[inside] = self.S.boundary_normal(X[inside])
        return out

    def sign(self):
        return NONNEGATIVE if self.alpha == 0 else MIXED

    def sublevel(self, dim):
        if self.alpha == 0:
            return self.S
        if isinstance(self.S, HalfspaceSet):
            return HalfspaceSet(self.S.normal, self.S.offset + self.alpha * np.linalg.norm(self.S.normal))
        if isinstance(self.S, BallSet):
            return BallSet(self.S.center, self.S.radius + self.alpha)
        return None

    def to_dict(self):
        return {"kind": "dist_shifted", "set": self.S.to_dict(), "alpha": self.alpha,
                "C_phi": self.C_phi, "convex": self.convex}


@dataclass(eq=False)
class Bump(Observable):
    """One-dimensional ``-(x+y)^2 + eps`` for ``|x+y| <= 1``, ``-1 + eps`` beyond; selection 0 at the kinks."""

    y: float
    eps: float
    C_phi: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise BadParameter("eps must be > 0")

    def value(self, X):
        if X.shape[1] != 1:
            raise DimensionMismatch("bump observables live on the real line")
        z = X[:, 0] + self.y
        return np.where(np.abs(z) <= 1.0, -z * z, -1.0) + self.eps

    def subgrad(self, X):
        z = X[:, 0] + self.y
        return np.where(np.abs(z) < 1.0, -2.0 * z, 0.0).reshape(-1, 1)

    def sign(self):
        return NONNEGATIVE if self.eps >= 1 else MIXED

    def to_dict(self):
        return {"kind": "bump", "y": self.y, "eps": self.eps, "C_phi": self.C_phi}


def bump_family(eps: float, y_min: float = -2.0, y_max: float = 2.0, n: int = 401) -> list[Bump]:
    return [Bump(float(y), eps) for y in np.linspace(y_min, y_max, n)]


@dataclass(eq=False)
class QuadCap(Observable):
    """``min{|x - c|^2 - r^2, M}``; ``M`` may be infinite. The quadratic branch is selected at the cap."""

    c: np.ndarray
    r: float
    M: float = math.inf
    C_phi: float = 1.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if not self.r >= 0:
            raise BadParameter("r must be >= 0")
        self.convex = math.isinf(self.M)
        if math.isinf(self.M):
            cn = float(self.c @ self.c)
            self.coercive = (1.0, self.r**2, 2.0) if cn == 0 else (0.5, self.r**2 + cn, 2.0)
        else:
            self.coercive = None

    def value(self, X):
        q = np.einsum("ij,ij->i", X - self.c, X - self.c) - self.r**2
        return np.minimum(q, self.M)

    def subgrad(self, X):
        q = np.einsum("ij,ij->i", X - self.c, X - self.c) - self.r**2
        return np.where((q <= self.M)[:, None], 2.0 * (X - self.c), 0.0)

    def sign(self):
        if self.M <= 0:
            return NONPOSITIVE
        return NONNEGATIVE if self.r == 0 else MIXED

    def sublevel(self, dim):
        if self.M <= 0:
            return whole_space(dim)
        return BallSet(self.c, self.r)

    def to_dict(self):
        return {"kind": "quad_cap", "c": self.c.tolist(), "r": self.r,
                "M": self.M if math.isfinite(self.M) else "inf", "C_phi": self.C_phi}


def observable_from_dict(record: dict) -> list[Observable]:
    """One record can expand to several observables (``bump_grid``)."""
    kind = record.get("kind")
    C = record.get("C_phi")
    extra = {} if C is None else {"C_phi": float(C)}
    if kind == "affine":
        return [Affine(record["a"], float(record.get("b", 0.0)), **extra)]
    if kind == "dist_shifted":
        return [DistShifted(set_from_dict(record["set"]), float(record.get("alpha", 0.0)),
                            convex=bool(record.get("convex", True)), **extra)]
    if kind == "bump":
        return [Bump(float(record["y"]), float(record["eps"]), **extra)]
    if kind == "bump_grid":
        fam = bump_family(float(record["eps"]), float(record["y_min"]), float(record["y_max"]), int(record["n"]))
        for b in fam:
            if C is not None:
                b.C_phi = float(C)
        return fam
    if kind == "quad_cap":
        return [QuadCap(record["c"], float(record["r"]), _num(record.get("M", math.inf)), **extra)]
    raise BadParameter(f"unknown observable kind {kind!r}")


# --- targets ---------------------------------------------------------------


@dataclass(eq=False)
class TargetSpec:
    observables: list
    p: float = 2.0
    tol_member: float = 1e-9
    source: list = field(default_factory=list)

    def __post_init__(self):
        if not self.observables:
            raise BadParameter("a target needs at least one observable")

    def to_dict(self):
        obs = self.source or [o.to_dict() for o in self.observables]
        return {"p": self.p, "observables": obs}


def target_from_dict(record: dict) -> TargetSpec:
    obs = []
    for r in record["observables"]:
        obs.extend(observable_from_dict(r))
    return TargetSpec(obs, float(record.get("p", 2.0)), float(record.get("tol_member", 1e-9)),
                      source=list(record["observables"]))


def integrals(target: TargetSpec, mu: DiscreteMeasure) -> np.ndarray:
    vals = np.array([math.fsum(mu.weights * o.value(mu.points)) for o in target.observables])
    if not np.all(np.isfinite(vals)):
        raise NonFinite("observable integrals are not finite")
    return vals


def sigma(target: TargetSpec, mu: DiscreteMeasure) -> tuple[float, int]:
    """``max_phi sum_i w_i phi(x_i)`` and the first maximizing index."""
    vals = integrals(target, mu)
    j = int(np.argmax(vals))
    return float(vals[j]), j


def is_member(target: TargetSpec, mu: DiscreteMeasure) -> bool:
    return sigma(target, mu)[0] <= target.tol_member


EXISTS_BY_SIGN = "ExistsBySignCondition"
SHAPE_NO_GUARANTEE = "ShapeComputedNoGuarantee"
UNKNOWN = "Unknown"


def classical_counterpart(target: TargetSpec, dim: int) -> tuple[ClassicalSet | None, str]:
    """Intersection of sublevel sets ``{phi <= 0}`` plus a diagnosis.

    ``ExistsBySignCondition`` when every observable has constant sign, so the
    target is exactly the measures supported in the returned set.
    """
    subs = [o.sublevel(dim) for o in target.observables]
    if any(s is None for s in subs):
        return None, UNKNOWN
    S = intersect(subs)
    if S is None:
        if all(isinstance(s, BoxSet) and np.all(np.isinf(s.lo)) and np.all(np.isinf(s.hi)) for s in subs):
            S = whole_space(dim)
        else:
            return None, UNKNOWN
    if all(o.sign() in (NONNEGATIVE, NONPOSITIVE) for o in target.observables):
        return S, EXISTS_BY_SIGN
    return S, SHAPE_NO_GUARANTEE


CLASSICAL_EXACT = "ClassicalExact"
PROJECTION_UPPER_BOUND = "ProjectionUpperBound"


def generalized_distance(target: TargetSpec, mu: DiscreteMeasure, mode: str = CLASSICAL_EXACT) -> float:
    """``||d_S||_{L^p_mu}``: exact generalized distance or an upper bound, depending on ``mode``."""
    S, diag = classical_counterpart(target, mu.dim)
    if mode == CLASSICAL_EXACT:
        if diag != EXISTS_BY_SIGN:
            raise NoClassicalCounterpart(f"exact distance needs a guaranteed counterpart (diagnosis {diag})")
    elif mode == PROJECTION_UPPER_BOUND:
        if S is None:
            raise NoClassicalCounterpart("sublevel set is outside the shape library")
    else:
        raise BadParameter(f"unknown mode {mode!r}")
    p = target.p
    return math.fsum(mu.weights * S.distance(mu.points) ** p) ** (1.0 / p)


def two_atom_witness_search(target: TargetSpec, mu: DiscreteMeasure, p: float, lo: float = -3.0, hi: float = 3.0,
                            step: float = 0.01, s_step: float = 0.01) -> dict:
    """Brute-force the smallest ``W_p(mu, nu)`` over two-atom members ``(1-s) delta_a + s delta_b`` on a grid.

    One-dimensional only. Uses the quantile form of ``W_p`` on the line, so
    every grid point is exact; the result is an upper bound on the
    generalized distance.
    """
    if mu.dim != 1:
        raise DimensionMismatch("witness search is one-dimensional")
    grid = np.round(np.arange(lo, hi + step / 2, step), 12)
    svals = np.round(np.arange(0.0, 1.0 + s_step / 2, s_step), 12)
    order = np.argsort(mu.points[:, 0], kind="stable")
    x = mu.points[order, 0]
    cw = np.concatenate([[0.0], np.cumsum(mu.weights[order])])
    cw[-1] = 1.0
    phi = np.array([o.value(grid.reshape(-1, 1)) for o in target.observables])  # (m, G)
    cost = np.abs(x[:, None] - grid[None, :]) ** p  # (n, G)
    best = (math.inf, None)
    for s in svals:
        cut = 1.0 - s
        below = np.clip(np.minimum(cw[1:], cut) - cw[:-1], 0.0, None)
        above = np.clip(cw[1:] - np.maximum(cw[:-1], cut), 0.0, None)
        Ca = below @ cost
        Cb = above @ cost
        tot = Ca[:, None] + Cb[None, :]
        member = np.all((1.0 - s) * phi[:, :, None] + s * phi[:, None, :] <= target.tol_member, axis=0)
        mask = member & (grid[:, None] <= grid[None, :])
        if not mask.any():
            continue
        vals = np.where(mask, tot, np.inf)
        k = int(np.argmin(vals))
        if vals.flat[k] < best[0]:
            ia, ib = divmod(k, grid.size)
            best = (float(vals.flat[k]), (float(s), float(grid[ia]), float(grid[ib])))
    w = best[0] ** (1.0 / p) if math.isfinite(best[0]) else math.inf
    return {"best_wp": w, "witness": best[1], "grid_step": step, "s_step": s_step, "range": [lo, hi]}


def _require_convex(target: TargetSpec):
    if not all(getattr(o, "convex", False) for o in target.observables):
        raise NonConvexFamily("geodesic convexity needs every observable to be convex")


def geodesic_convexity_audit(target: TargetSpec, mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                             plans: Sequence[TransportPlan] | None = None, t_grid=None) -> dict:
    """Largest ``sigma`` along interpolations ``((1-t) x + t y) # pi`` for each plan."""
    _require_convex(target)
    if plans is None:
        plans = [wp_distance(mu0, mu1, target.p)[1], product_plan(mu0, mu1, target.p)]
    t_grid = np.linspace(0.0, 1.0, 11) if t_grid is None else np.asarray(t_grid, dtype=float)
    per_plan = []
    for plan in plans:
        per_plan.append(max(sigma(target, interpolate_along_plan(plan, mu0, mu1, float(t)))[0] for t in t_grid))
    return {"max_sigma": max(per_plan), "per_plan": per_plan, "n_grid": len(t_grid),
            "ok": max(per_plan) <= target.tol_member}


def semiconcavity_audit(target: TargetSpec, mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: float | None = None,
                        t_grid=None, region: str | None = None) -> dict:
    """Smallest ``C`` with ``d^p(mu_t) >= (1-t) d^p(mu_0) + t d^p(mu_1) - C t (1-t) W_p^{min(p,2)}`` on the grid.

    ``d`` is the exact generalized distance along a computed ``W_p``
    geodesic. ``global_p2_ok`` is ``p == 2 and C <= 1 + 1e-6``.
    """
    p = float(target.p if p is None else p)
    S, diag = classical_counterpart(target, mu0.dim)
    if diag != EXISTS_BY_SIGN:
        raise NoClassicalCounterpart(f"semiconcavity audit needs a guaranteed counterpart (diagnosis {diag})")
    t_grid = np.linspace(0.0, 1.0, 11) if t_grid is None else np.asarray(t_grid, dtype=float)
    W, plan = wp_distance(mu0, mu1, p)

    def dp(mu):
        return math.fsum(mu.weights * S.distance(mu.points) ** p)

    d0, d1 = dp(mu0), dp(mu1)
    scale = W ** min(p, 2.0)
    C = 0.0
    worst_deficit = 0.0
    for t in t_grid:
        if t <= 0.0 or t >= 1.0:
            continue
        dt = dp(interpolate_along_plan(plan, mu0, mu1, float(t)))
        deficit = (1 - t) * d0 + t * d1 - dt
        worst_deficit = max(worst_deficit, deficit)
        if scale > 0:
            C = max(C, deficit / (t * (1 - t) * scale))
    if scale == 0 and worst_deficit > 1e-12:
        C = math.inf
    return {"min_feasible_C": C, "p": p, "W": W, "global_p2_ok": p == 2.0 and C <= 1.0 + 1e-6,
            "n_grid": len(t_grid), "region": region}


def coercivity_moment_check(target: TargetSpec, mu: DiscreteMeasure) -> dict | None:
    """For a coercive observable ``phi >= A |x|^p - C``: members have ``m_p <= C / A``."""
    for o in target.observables:
        if o.coercive is not None:
            A, C, p = o.coercive
            m = moment_p(mu, p) ** p
            return {"moment": m, "bound": C / A, "member": is_member(target, mu), "ok": m <= C / A + 1e-9}
    return None
