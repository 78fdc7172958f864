"""Exact p-Wasserstein distances, transport plans and displacement interpolation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _backend
from ._util import dumps, row_norms
from .errors import BadOrder, BadParameter, DimensionMismatch, NonOptimalPlan
from .measures import DiscreteMeasure, _trusted

MARGINAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse coupling: ``mass[k]`` moves from source atom ``rows[k]`` to target atom ``cols[k]``."""

    rows: np.ndarray
    cols: np.ndarray
    masses: np.ndarray
    source_n: int
    target_n: int
    p: float
    cost: float
    optimal: bool = False

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(m)) for i, j, m in zip(self.rows, self.cols, self.masses)]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def as_matrix(self) -> np.ndarray:
        P = np.zeros((self.source_n, self.target_n))
        np.add.at(P, (self.rows, self.cols), self.masses)
        return P

    def to_dict(self) -> dict:
        return {
            "entries": [[i, j, m] for i, j, m in self.entries],
            "p": self.p,
            "cost": self.cost,
            "optimal": self.optimal,
            "source_n": self.source_n,
            "target_n": self.target_n,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


def cost_matrix(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return dist**p


def plan_cost(plan_rows, plan_cols, masses, x, y, p) -> float:
    """Compensated sum of ``mass * |x_i - y_j|^p`` over plan entries."""
    d = row_norms(x[plan_rows] - y[plan_cols])
    return math.fsum(masses * d**p)


def make_plan(mu: DiscreteMeasure, nu: DiscreteMeasure, rows, cols, masses, p: float, optimal=False):
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    masses = np.asarray(masses, dtype=float)
    keep = masses > 0
    rows, cols, masses = rows[keep], cols[keep], masses[keep]
    cost = plan_cost(rows, cols, masses, mu.points, nu.points, p)
    return TransportPlan(rows, cols, masses, mu.n, nu.n, float(p), cost, optimal)


def check_marginals(plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure, tol=MARGINAL_TOL) -> float:
    """Largest marginal violation of ``plan`` against ``(mu, nu)``; raises if above ``tol``."""
    if plan.source_n != mu.n or plan.target_n != nu.n:
        raise ValueError(f"plan is {plan.source_n}x{plan.target_n}, measures have {mu.n} and {nu.n} atoms")
    rs = np.zeros(mu.n)
    cs = np.zeros(nu.n)
    np.add.at(rs, plan.rows, plan.masses)
    np.add.at(cs, plan.cols, plan.masses)
    err = max(float(np.abs(rs - mu.weights).max()), float(np.abs(cs - nu.weights).max()))
    if err > tol:
        raise ValueError(f"plan marginals off by {err:.3e}")
    return err


def _validate(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> None:
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"dimensions differ: {mu.dim} vs {nu.dim}")
    if not p >= 1:
        raise BadOrder(f"p must be >= 1, got {p}")


def wp_distance(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> tuple[float, TransportPlan]:
    """Exact ``W_p(mu, nu)`` and an optimal plan.

    Equal atom counts with uniform weights go through the assignment solver;
    anything else through the transportation network simplex.
    """
    _validate(mu, nu, p)
    C = cost_matrix(mu.points, nu.points, p)
    if mu.n == nu.n and mu.is_equal_weight() and nu.is_equal_weight():
        col4row = _backend.lsap(C)
        rows = np.arange(mu.n)
        plan = make_plan(mu, nu, rows, col4row, mu.weights, p, optimal=True)
    else:
        rows, cols, flows = _backend.transport_simplex(mu.weights, nu.weights, C)
        plan = make_plan(mu, nu, rows, cols, flows, p, optimal=True)
    return plan.cost ** (1.0 / p), plan


def wp(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> float:
    return wp_distance(mu, nu, p)[0]


def plan_inverse(plan: TransportPlan) -> TransportPlan:
    return TransportPlan(
        plan.cols.copy(), plan.rows.copy(), plan.masses.copy(),
        plan.target_n, plan.source_n, plan.p, plan.cost, plan.optimal,
    )


def product_plan(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> TransportPlan:
    """Independent coupling ``mu x nu``."""
    rows, cols = np.meshgrid(np.arange(mu.n), np.arange(nu.n), indexing="ij")
    masses = np.outer(mu.weights, nu.weights)
    return make_plan(mu, nu, rows.ravel(), cols.ravel(), masses.ravel(), p, optimal=False)


def identity_plan(mu: DiscreteMeasure, p: float = 2.0) -> TransportPlan:
    idx = np.arange(mu.n)
    return make_plan(mu, mu, idx, idx, mu.weights, p, optimal=True)


def interpolate_along_plan(plan: TransportPlan, mu0: DiscreteMeasure, mu1: DiscreteMeasure, t: float) -> DiscreteMeasure:
    """``((1-t) pr1 + t pr2) # plan``: one atom per plan entry."""
    if not 0.0 <= t <= 1.0:
        raise BadParameter(f"t must lie in [0, 1], got {t}")
    if plan.source_n != mu0.n or plan.target_n != mu1.n:
        raise DimensionMismatch("plan does not match the endpoint measures")
    pts = (1.0 - t) * mu0.points[plan.rows] + t * mu1.points[plan.cols]
    return _trusted(pts, plan.masses / math.fsum(plan.masses))


@dataclass(frozen=True, eq=False)
class GeodesicSpec:
    plan: TransportPlan
    mu0: DiscreteMeasure
    mu1: DiscreteMeasure

    @classmethod
    def between(cls, mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: float = 2.0) -> "GeodesicSpec":
        _, plan = wp_distance(mu0, mu1, p)
        return cls(plan, mu0, mu1)

    def __post_init__(self):
        check_marginals(self.plan, self.mu0, self.mu1)


def geodesic_point(g: GeodesicSpec, t: float) -> DiscreteMeasure:
    return interpolate_along_plan(g.plan, g.mu0, g.mu1, t)


def verify_constant_speed(g: GeodesicSpec, p: float, grid: Sequence[float]) -> dict:
    """Largest relative deviation of ``W_p(mu_s, mu_t)`` from ``(t - s) W_p(mu_0, mu_1)``."""
    if not g.plan.optimal:
        raise NonOptimalPlan("constant speed is only guaranteed along optimal plans")
    total = wp(g.mu0, g.mu1, p)
    scale = max(total, 1e-15)
    grid = sorted(float(t) for t in grid)
    points = [geodesic_point(g, t) for t in grid]
    worst = 0.0
    for a in range(len(grid)):
        for b in range(a + 1, len(grid)):
            d = wp(points[a], points[b], p)
            worst = max(worst, abs(d - (grid[b] - grid[a]) * total) / scale)
    return {"max_relative_error": worst, "w_total": total, "grid": grid}


def with_flag(plan: TransportPlan, optimal: bool) -> TransportPlan:
    return replace(plan, optimal=optimal)


def plan_from_dict(record: dict) -> TransportPlan:
    entries = np.asarray(record["entries"], dtype=float).reshape(-1, 3)
    rows = entries[:, 0].astype(np.int64)
    cols = entries[:, 1].astype(np.int64)
    return TransportPlan(
        rows, cols, entries[:, 2],
        int(record.get("source_n", rows.max() + 1 if rows.size else 0)),
        int(record.get("target_n", cols.max() + 1 if cols.size else 0)),
        float(record["p"]), float(record["cost"]), bool(record["optimal"]),
    )
