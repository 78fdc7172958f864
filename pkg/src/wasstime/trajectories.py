"""Particle trajectories of the nonlocal inclusion, their algebra and audits.

Each particle follows explicit Euler steps ``x_{k+1} = x_k + h v_k`` with
``v_k`` chosen by a policy inside ``F(mu_k, x_k)``, where ``mu_k`` is the
current empirical measure. Paths plus weights are the discrete superposition
representation of the measure curve.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._util import derive_rng, dumps, row_norms
from .dynamics import Ball, Box, DynamicsSpec, k_f, project_batch, support_argmin_batch
from .errors import (
    BadParameter,
    DimensionMismatch,
    EndpointMismatch,
    GridMismatch,
    NonFinite,
    OffGrid,
    PolicyOutOfBody,
    StepTooLarge,
)
from .measures import DiscreteMeasure, _trusted, moment_p
from .transport import wp, wp_distance

ENDPOINT_TOL = 1e-10
GRID_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time grid ``t0 + k h`` (k = 0..K) with per-particle paths and applied velocities.

    ``paths`` has shape ``(n, K+1, d)``, ``velocities`` ``(n, K, d)``.
    """

    t0: float
    h: float
    paths: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray
    spec: DynamicsSpec
    policy_id: str = ""

    @property
    def n_steps(self) -> int:
        return self.velocities.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_steps + 1)

    @property
    def duration(self) -> float:
        return self.h * self.n_steps

    @property
    def n(self) -> int:
        return self.paths.shape[0]

    @property
    def dim(self) -> int:
        return self.paths.shape[2]

    def measure_at(self, k: int) -> DiscreteMeasure:
        return _trusted(self.paths[:, k, :], self.weights)

    def final_measure(self) -> DiscreteMeasure:
        return self.measure_at(self.n_steps)

    def index_of(self, t: float) -> int:
        k = int(round((t - self.t0) / self.h))
        if k < 0 or k > self.n_steps or abs(self.t0 + k * self.h - t) > GRID_TOL:
            raise OffGrid(f"time {t} is not on the grid")
        return k

    def to_csv(self) -> str:
        """Rows ``t, particle, x_1..x_d, v_1..v_d, w``; the last time has blank velocities."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.dim
        w.writerow(["t", "particle"] + [f"x_{j + 1}" for j in range(d)] + [f"v_{j + 1}" for j in range(d)] + ["w"])
        times = self.times
        f = lambda x: format(float(x), ".17g")  # noqa: E731
        for k in range(self.n_steps + 1):
            for i in range(self.n):
                vel = [f(v) for v in self.velocities[i, k]] if k < self.n_steps else [""] * d
                w.writerow([f(times[k]), i] + [f(x) for x in self.paths[i, k]] + vel + [f(self.weights[i])])
        return buf.getvalue()

    def summary(self, p: float, reference: DiscreteMeasure | None = None, stride: int = 1) -> dict:
        idx = list(range(0, self.n_steps + 1, max(1, stride)))
        if idx[-1] != self.n_steps:
            idx.append(self.n_steps)
        out = {
            "n": self.n,
            "dim": self.dim,
            "h": self.h,
            "n_steps": self.n_steps,
            "policy": self.policy_id,
            "times": [float(self.times[k]) for k in idx],
            "moments": [moment_p(self.measure_at(k), p) for k in idx],
        }
        if reference is not None:
            out["distance_to_reference"] = [wp(self.measure_at(k), reference, p) for k in idx]
        return out


def trajectory_from_csv(text: str, spec: DynamicsSpec, policy_id: str = "csv") -> Trajectory:
    """Parse the CSV layout written by :meth:`Trajectory.to_csv`."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    d = sum(1 for c in header if c.startswith("x_"))
    ts = sorted({float(r[0]) for r in body})
    n = 1 + max(int(r[1]) for r in body)
    K = len(ts) - 1
    paths = np.empty((n, K + 1, d))
    vel = np.zeros((n, K, d))
    weights = np.empty(n)
    index = {t: k for k, t in enumerate(ts)}
    for r in body:
        k, i = index[float(r[0])], int(r[1])
        paths[i, k] = [float(x) for x in r[2:2 + d]]
        if k < K:
            vel[i, k] = [float(v) for v in r[2 + d:2 + 2 * d]]
        weights[i] = float(r[2 + 2 * d])
    h = (ts[-1] - ts[0]) / K if K else 0.0
    return Trajectory(ts[0], h, paths, vel, weights, spec, policy_id)


# --- policies --------------------------------------------------------------


class Policy:
    """Chooses controls ``U`` (one row per particle) so that ``v = a + R u``."""

    policy_id = "policy"
    trusted = False

    def controls(self, spec: DynamicsSpec, mu: DiscreteMeasure, X: np.ndarray, centers: np.ndarray, k: int, t: float):
        raise NotImplementedError


@dataclass
class ConstantPolicy(Policy):
    u: np.ndarray

    policy_id = "constant"

    def controls(self, spec, mu, X, centers, k, t):
        return np.tile(np.asarray(self.u, dtype=float).reshape(1, -1), (X.shape[0], 1))


@dataclass
class SteepestDescent(Policy):
    """Velocity minimizing ``<xi(x), v>`` over ``F(mu, x)``.

    ``field`` maps positions ``(n, d)`` to covectors ``(n, d)`` (for example an
    observable's subgradient selection). ``scale`` in ``[0, 1]`` shrinks the
    control toward the body's center, which stays admissible for balls and
    boxes.
    """

    field: Callable[[np.ndarray], np.ndarray]
    scale: float = 1.0

    trusted = True

    @property
    def policy_id(self):
        return "steepest" if self.scale == 1.0 else f"steepest*{self.scale:g}"

    def controls(self, spec, mu, X, centers, k, t):
        _, _, U = support_argmin_batch(centers, spec.gain_matrix, spec.body, self.field(X))
        return U if self.scale == 1.0 else self.scale * U


@dataclass
class Tracking(Policy):
    """Projects desired velocities onto the current images.

    ``desired`` is either ``(n, d)`` (held constant) or ``(n, K, d)`` indexed by
    step.
    """

    desired: np.ndarray
    policy_id = "tracking"
    trusted = True

    def controls(self, spec, mu, X, centers, k, t):
        D = self.desired if self.desired.ndim == 2 else self.desired[:, k, :]
        _, _, U = project_batch(centers, spec, D)
        return U


CUSTOM_POLICIES: dict[str, Callable] = {}


def register_policy(name: str):
    """Decorator adding ``fn(spec, mu, X, centers, k, t) -> U`` to the custom registry."""

    def wrap(fn):
        CUSTOM_POLICIES[name] = fn
        return fn

    return wrap


@dataclass
class Custom(Policy):
    name: str

    @property
    def policy_id(self):
        return f"custom:{self.name}"

    def controls(self, spec, mu, X, centers, k, t):
        return CUSTOM_POLICIES[self.name](spec, mu, X, centers, k, t)


def _check_controls(body, U: np.ndarray) -> None:
    if isinstance(body, (Ball, Box)) or U.shape[0] <= 64:
        ok = body.contains(U, 1e-12)
    else:
        uniq = np.unique(U, axis=0)
        ok = body.contains(uniq, 1e-12)
    if not np.all(ok):
        raise PolicyOutOfBody("policy returned a control outside the body")


# --- integration -----------------------------------------------------------


def integrate(spec: DynamicsSpec, mu0: DiscreteMeasure, policy: Policy, T: float, h: float, t0: float = 0.0) -> Trajectory:
    """Explicit Euler particle integration over ``[t0, t0 + T]``.

    Requires ``h <= T``, ``h * declared_L <= 0.1`` and ``T`` a whole number of
    steps (within 1e-9).
    """
    if not (h > 0 and T > 0):
        raise BadParameter("T and h must be positive")
    if h > T * (1 + 1e-12):
        raise StepTooLarge(f"h = {h} exceeds T = {T}")
    if h * spec.declared_L > 0.1 + 1e-12:
        raise StepTooLarge(f"h * L = {h * spec.declared_L:.3g} exceeds 0.1")
    K = int(round(T / h))
    if abs(K * h - T) > GRID_TOL:
        raise GridMismatch(f"T = {T} is not a multiple of h = {h}")
    if mu0.dim != spec.dim:
        raise DimensionMismatch("measure and dynamics dimensions differ")
    n, d = mu0.n, mu0.dim
    paths = np.empty((n, K + 1, d))
    vel = np.empty((n, K, d))
    paths[:, 0] = mu0.points
    w = mu0.weights
    G = spec.gain_matrix
    for k in range(K):
        X = paths[:, k]
        mu = _trusted(X, w)
        centers = spec.centers(mu, X)
        U = np.asarray(policy.controls(spec, mu, X, centers, k, t0 + k * h), dtype=float)
        if not policy.trusted:
            _check_controls(spec.body, U)
        V = centers + U @ G.T
        vel[:, k] = V
        paths[:, k + 1] = X + h * V
    if not np.all(np.isfinite(paths)):
        raise NonFinite("trajectory diverged")
    return Trajectory(t0, h, paths, vel, w.copy(), spec, policy.policy_id)


def concatenate(A: Trajectory, B: Trajectory) -> Trajectory:
    """``A`` followed by ``B`` shifted to start where ``A`` ends."""
    if abs(A.h - B.h) > 1e-15 * max(A.h, 1.0):
        raise GridMismatch("step sizes differ")
    if not (A.spec is B.spec or A.spec == B.spec):
        raise GridMismatch("trajectories use different dynamics")
    if A.n != B.n or A.dim != B.dim:
        raise EndpointMismatch("particle counts differ")
    if (np.abs(A.paths[:, -1] - B.paths[:, 0]).max() > ENDPOINT_TOL
            or np.abs(A.weights - B.weights).max() > ENDPOINT_TOL):
        raise EndpointMismatch("end of A does not match start of B")
    paths = np.concatenate([A.paths[:, :-1], B.paths], axis=1)
    vel = np.concatenate([A.velocities, B.velocities], axis=1)
    pid = A.policy_id if A.policy_id == B.policy_id else f"{A.policy_id}+{B.policy_id}"
    return Trajectory(A.t0, A.h, paths, vel, A.weights, A.spec, pid)


def restrict(A: Trajectory, a: float, b: float) -> Trajectory:
    """Sub-trajectory on the grid interval ``[a, b]`` (absolute times kept)."""
    ka, kb = A.index_of(a), A.index_of(b)
    if not ka < kb:
        raise OffGrid("need a < b")
    return Trajectory(
        A.t0 + ka * A.h, A.h, A.paths[:, ka:kb + 1].copy(), A.velocities[:, ka:kb].copy(),
        A.weights, A.spec, A.policy_id,
    )


def restrict_steps(A: Trajectory, ka: int, kb: int) -> Trajectory:
    return restrict(A, A.t0 + ka * A.h, A.t0 + kb * A.h)


# --- audits ----------------------------------------------------------------


def continuity_residual(traj: Trajectory, phi: Callable, grad_phi: Callable, stride: int = 1) -> float:
    """Largest discrepancy in the weak form of the continuity equation.

    For sampled steps ``k``: ``|(Phi(k+1) - Phi(k))/h - sum_i w_i <grad phi(x_i), v_i>|``
    with ``Phi(k) = sum_i w_i phi(x_i(t_k))``.
    """
    w = traj.weights
    worst = 0.0
    for k in range(0, traj.n_steps, max(1, stride)):
        X0, X1, V = traj.paths[:, k], traj.paths[:, k + 1], traj.velocities[:, k]
        f0, f1, g = np.asarray(phi(X0)), np.asarray(phi(X1)), np.asarray(grad_phi(X0))
        if not (np.all(np.isfinite(f0)) and np.all(np.isfinite(f1)) and np.all(np.isfinite(g))):
            raise NonFinite("test function not finite on the trajectory")
        lhs = math.fsum(w * (f1 - f0)) / traj.h
        rhs = math.fsum(w * np.einsum("ij,ij->i", g, V))
        worst = max(worst, abs(lhs - rhs))
    return worst


def velocity_admissibility(traj: Trajectory, steps=None) -> float:
    """Largest distance of a stored velocity to its image ``F(mu_k, x_i)``."""
    worst = 0.0
    ks = range(traj.n_steps) if steps is None else steps
    for k in ks:
        mu = traj.measure_at(k)
        centers = traj.spec.centers(mu, mu.points)
        d, _, _ = project_batch(centers, traj.spec, traj.velocities[:, k])
        worst = max(worst, float(d.max()))
    return worst


def moment_audit(traj: Trajectory, p: float, M_theta: float | None = None, n_pairs: int = 24, seed: int = 0) -> dict:
    """Check the three moment estimates on a trajectory driven by its own measure.

    (i) ``m_p^{1/p}(mu_t) <= B := e^{LT}(m_p^{1/p}(mu_0) + K_F T + L T M)``;
    (ii) ``W_p(mu_t, mu_s) <= (K_F + L M + L B) |t - s|`` on sampled pairs;
    (iii) ``(sum_i w_i max_k |v_ik|^p)^{1/p} <= K_F + L (B + M)``.
    The per-particle maximum speed is reported as a diagnostic.
    """
    L = traj.spec.declared_L
    KF = k_f(traj.spec)
    T = traj.duration
    K = traj.n_steps
    moments = np.array([moment_p(traj.measure_at(k), p) for k in range(K + 1)])
    M = float(moments.max()) if M_theta is None else float(M_theta)
    B = math.exp(L * T) * (moments[0] + KF * T + L * T * M)
    lip = KF + L * M + L * B
    speed_bound = KF + L * (B + M)

    rng = derive_rng(seed, "moment_audit_pairs")
    pairs = [(0, K), (0, 1), (K - 1, K)] + [tuple(sorted(rng.choice(K + 1, 2, replace=False))) for _ in range(n_pairs)]
    margin2 = math.inf
    for s, t in pairs:
        dist = wp(traj.measure_at(s), traj.measure_at(t), p)
        margin2 = min(margin2, lip * (t - s) * traj.h - dist)

    speeds = row_norms(traj.velocities.reshape(-1, traj.dim)).reshape(traj.n, K).max(axis=1)
    lp_speed = math.fsum(traj.weights * speeds**p) ** (1.0 / p)
    margin1 = float(B - moments.max())
    margin3 = float(speed_bound - lp_speed)
    return {
        "L": L,
        "K_F": KF,
        "T": T,
        "M_theta": M,
        "moment_bound": B,
        "lipschitz_bound": lip,
        "speed_bound": speed_bound,
        "observed_max_moment": float(moments.max()),
        "observed_lp_speed": lp_speed,
        "max_particle_speed": float(speeds.max()),
        "bound1_ok": margin1 >= 0,
        "bound2_ok": margin2 >= 0,
        "bound3_ok": margin3 >= 0,
        "margins": [margin1, float(margin2), margin3],
    }


@dataclass
class FilippovReport:
    L: float
    T: float
    p: float
    D: float
    D_hat: float
    constant: float
    initial_distance: float
    sup_distance: float
    sup_ratio: float
    satisfied: bool
    distances: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_json(self) -> str:
        return dumps(self.to_dict())


def filippov_constant(L: float, T: float, p: float) -> float:
    return 2.0 ** ((p - 1.0) / p) * math.exp(L * (2.0 + L * math.exp(L * T)) * T)


def filippov_track(trajA: Trajectory, muB: DiscreteMeasure, p: float) -> tuple[Trajectory, FilippovReport]:
    """Build a trajectory from ``muB`` that follows ``trajA``.

    An optimal plan couples the two initial measures; every plan entry
    ``(i, j, m)`` becomes a B-particle starting at ``y_j`` with mass ``m``
    that, at each step, takes the projection of A-particle ``i``'s recorded
    velocity onto its own current image.
    """
    spec = trajA.spec
    muA = trajA.measure_at(0)
    w0, plan = wp_distance(muA, muB, p)
    src = plan.rows
    K = trajA.n_steps
    h = trajA.h
    Y = muB.points[plan.cols].copy()
    wB = plan.masses / math.fsum(plan.masses)
    paths = np.empty((Y.shape[0], K + 1, spec.dim))
    vel = np.empty((Y.shape[0], K, spec.dim))
    paths[:, 0] = Y
    for k in range(K):
        X = paths[:, k]
        centers = spec.centers(_trusted(X, wB), X)
        _, P, _ = project_batch(centers, spec, trajA.velocities[src, k])
        vel[:, k] = P
        paths[:, k + 1] = X + h * P
    trajB = Trajectory(trajA.t0, h, paths, vel, wB, spec, "filippov")
    dists = [wp(trajA.measure_at(k), trajB.measure_at(k), p) for k in range(K + 1)]
    sup_d = max(dists)
    if w0 > 0:
        ratio = sup_d / w0
    else:
        ratio = 0.0 if sup_d <= 1e-9 else math.inf
    L, T = spec.declared_L, trajA.duration
    const = filippov_constant(L, T, p)
    report = FilippovReport(
        L=L, T=T, p=p, D=L * math.exp(L * T) + 1.0, D_hat=L * (2.0 + L * math.exp(L * T)),
        constant=const, initial_distance=w0, sup_distance=sup_d, sup_ratio=ratio,
        satisfied=ratio <= const * (1.0 + 1e-6), distances=dists,
    )
    return trajB, report


def initial_velocity_audit(spec: DynamicsSpec, mu: DiscreteMeasure, v_selection, t_grid, h: float, p: float = 2.0) -> dict:
    """Check the initial-velocity estimate along a tracking trajectory.

    Integrates with the policy projecting ``v_selection`` onto the current
    images, then compares, for each ``t`` and atom,
    ``|(x(t) - x(0))/t - v|`` with ``L e^{Lt} [ (1/t) int_0^t W_p(mu_s, mu) ds + t |v| / 2 ]``
    (trapezoid rule in ``s``). Slack: ``1e-6 + L e^{Lt} h max|v|``.
    """
    V0 = np.atleast_2d(np.asarray(v_selection, dtype=float))
    centers = spec.centers(mu, mu.points)
    d0, _, _ = project_batch(centers, spec, V0)
    selection_ok = bool(d0.max() <= 1e-9)
    t_grid = sorted(float(t) for t in t_grid)
    T = t_grid[-1]
    K = int(round(T / h))
    traj = integrate(spec, mu, Tracking(V0), K * h, h)
    dists = np.array([wp(traj.measure_at(k), mu, p) for k in range(K + 1)])
    L = spec.declared_L
    vmax = float(row_norms(traj.velocities.reshape(-1, spec.dim)).max()) if K else 0.0
    rows = []
    ok = selection_ok
    for t in t_grid:
        k = traj.index_of(t)
        integral = float(np.trapezoid(dists[:k + 1], dx=h)) if hasattr(np, "trapezoid") else float(np.trapz(dists[:k + 1], dx=h))
        lhs = row_norms((traj.paths[:, k] - traj.paths[:, 0]) / t - V0)
        rhs = L * math.exp(L * t) * (integral / t + 0.5 * t * row_norms(V0))
        slack = 1e-6 + L * math.exp(L * t) * h * vmax
        excess = float((lhs - rhs).max())
        rows.append({"t": t, "max_lhs": float(lhs.max()), "min_rhs": float(rhs.min()), "max_excess": excess,
                     "slack": slack, "ok": excess <= slack})
        ok = ok and excess <= slack
    return {"selection_in_image": selection_ok, "checks": rows, "ok": ok}
