"""Minimum-time estimates from (r, Q)-attainability.

A profile pairs a window length ``r(q)`` with a required decrease
``Q(t, q) < 0``. The integral ``int_0^sigma r(q) / |Q(r(q), q)| dq`` bounds the
time to reach the target from a measure with ``sigma_Phi = sigma``; the greedy
scheme realizes the bound step by step and audits it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._util import derive_rng, dumps, row_norms
from .dynamics import Ball, DynamicsSpec, ZeroDrift
from .errors import (
    BadParameters,
    BudgetExceeded,
    NonIntegrable,
    UnsupportedOracle,
    WrongOrder,
)
from .measures import DiscreteMeasure, _trusted, new_measure
from .targets import DistShifted, HalfspaceSet, TargetSpec, sigma
from .trajectories import SteepestDescent, Trajectory, concatenate, integrate, restrict_steps

QUAD_TOL = 1e-12


# --- profiles --------------------------------------------------------------


@dataclass(frozen=True)
class PowerLaw:
    """``r(q) = min{1, 1/(2L), q^(1/beta)}``, ``Q(t, q) = -K t^(alpha+1) r(q)``."""

    alpha: float
    beta: float
    K: float
    L: float

    def __post_init__(self):
        _check_params(self.alpha, self.beta, self.K, self.L)

    @property
    def cap(self) -> float:
        return min(1.0, 1.0 / (2.0 * self.L))

    @property
    def knot(self) -> float:
        return min(1.0, (2.0 * self.L) ** (-self.beta))

    @property
    def singularity(self) -> float:
        return (self.alpha + 1.0) / self.beta

    def r(self, q: float) -> float:
        return min(self.cap, q ** (1.0 / self.beta)) if q > 0 else 0.0

    def Q(self, t: float, q: float) -> float:
        return -self.K * t ** (self.alpha + 1.0) * self.r(q)

    def knots(self) -> list[float]:
        return [self.knot]

    def to_dict(self):
        return {"kind": "power_law", "alpha": self.alpha, "beta": self.beta, "K": self.K, "L": self.L}


@dataclass(frozen=True)
class CustomProfile:
    """User-supplied ``r`` and ``Q``; ``r`` is capped at ``min{1, 1/(2L)}``.

    ``singularity`` is an exponent ``s < 1`` with integrand ``O(q^-s)`` at 0,
    used for the substitution ``q = x^(1/(1-s))``; ``knots`` are kinks of the
    integrand.
    """

    r_fn: Callable[[float], float]
    Q_fn: Callable[[float, float], float]
    L: float
    singularity: float = 0.0
    knots_: tuple = ()
    name: str = "custom"

    @property
    def cap(self) -> float:
        return min(1.0, 1.0 / (2.0 * self.L))

    def r(self, q: float) -> float:
        return min(self.cap, float(self.r_fn(q))) if q > 0 else 0.0

    def Q(self, t: float, q: float) -> float:
        return float(self.Q_fn(t, q))

    def knots(self) -> list[float]:
        return list(self.knots_)

    def to_dict(self):
        return {"kind": "custom", "name": self.name, "L": self.L}


def profile_from_dict(record: dict) -> PowerLaw:
    if record.get("kind", "power_law") != "power_law":
        raise BadParameters("only power_law profiles can be read from a config")
    return PowerLaw(float(record["alpha"]), float(record["beta"]), float(record["K"]), float(record["L"]))


def _check_params(alpha, beta, K, L):
    if not (alpha >= 0 and beta > alpha + 1 and K > 0 and L > 0):
        raise BadParameters(f"need alpha >= 0, beta > alpha + 1, K > 0, L > 0; got {(alpha, beta, K, L)}")


def integrand(profile, q: float) -> float:
    """``r(q) / |Q(r(q), q)|``."""
    rq = profile.r(q)
    return rq / abs(profile.Q(rq, q))


# --- time bounds -----------------------------------------------------------


def closed_form_bound(alpha: float, beta: float, K: float, L: float, sigma_val: float) -> float:
    """Piecewise closed form of the time bound for the power-law profile."""
    _check_params(alpha, beta, K, L)
    if sigma_val < 0:
        raise BadParameters("sigma must be >= 0")
    e = beta - alpha - 1.0
    two_l = 2.0 * L
    knot = min(1.0, two_l ** (-beta))
    if sigma_val <= knot:
        return beta * sigma_val ** (e / beta) / (K * e)
    if two_l > 1.0:
        return beta * two_l ** (-beta + alpha + 1.0) / (K * e) + two_l ** (alpha + 1.0) * (sigma_val - two_l ** (-beta)) / K
    return beta / (K * e) + (sigma_val - 1.0) / K


def _simpson(f, a, b, tol, depth=60):
    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return rec(a, m, fa, flm, fm, left, tol / 2, depth - 1) + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1)

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)


def time_bound_quadrature(profile, sigma0: float, tol: float = QUAD_TOL) -> float:
    """Adaptive Simpson evaluation of ``int_0^sigma0 r(q)/|Q(r(q), q)| dq``.

    The interval is split at the profile's knots; on the first piece the
    substitution ``q = x^(1/(1-s))`` removes the ``q^-s`` singularity.
    """
    if sigma0 < 0:
        raise BadParameters("sigma must be >= 0")
    if sigma0 == 0:
        return 0.0
    probe = np.geomspace(max(sigma0, 1e-12) * 1e-6, sigma0, 64)
    vals = [integrand(profile, q) for q in probe]
    if any(not math.isfinite(v) or v <= 0 for v in vals) or any(b > a * (1 + 1e-12) for a, b in zip(vals, vals[1:])):
        raise NonIntegrable("integrand must be positive, finite and nonincreasing")
    s = float(profile.singularity)
    if not s < 1:
        raise NonIntegrable("singularity exponent must be < 1")
    cuts = [0.0] + sorted(k for k in profile.knots() if 0 < k < sigma0) + [sigma0]
    total = []
    for a, b in zip(cuts, cuts[1:]):
        if a == 0.0:
            g = 1.0 / (1.0 - s)
            xb = b ** (1.0 - s)

            def f(x, g=g):
                # x^(g-1) = q^s; flooring q keeps the (continuous) limit at 0
                q = max(x**g, 1e-150)
                return g * integrand(profile, q) * q**s

            scale = abs(f(xb)) * xb + 1.0
            total.append(_simpson(f, 0.0, xb, tol * scale))
        else:
            scale = abs(integrand(profile, a)) * (b - a) + 1.0
            total.append(_simpson(lambda q: integrand(profile, q), a, b, tol * scale))
    return math.fsum(total)


def time_bound(profile, sigma0: float) -> float:
    """Time bound: closed form for power laws, quadrature otherwise."""
    if isinstance(profile, PowerLaw):
        return closed_form_bound(profile.alpha, profile.beta, profile.K, profile.L, sigma0)
    return time_bound_quadrature(profile, sigma0, tol=1e-8)


# --- greedy descent --------------------------------------------------------


@dataclass
class GreedyStep:
    sigma: float
    window: float
    window_steps: int
    window_rounded: bool
    Q: float
    t: float
    decrease: float
    window_min_decrease: float
    certificate_ok: bool
    argmax: int

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class GreedyReport:
    steps: list = field(default_factory=list)
    hit: bool = False
    hitting_time: float = 0.0
    bound_T: float = 0.0
    budget_ok: bool = True
    sigma0: float = 0.0
    failure: str | None = None
    h: float = 0.0

    def to_dict(self):
        out = dict(self.__dict__)
        out["steps"] = [s.to_dict() for s in self.steps]
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self, profile) -> str:
        lines = ["step,sigma,t,elapsed,bound_remaining"]
        elapsed = 0.0
        for i, s in enumerate(self.steps):
            lines.append(",".join([str(i), format(s.sigma, ".17g"), format(s.t, ".17g"),
                                   format(elapsed, ".17g"), format(time_bound(profile, s.sigma), ".17g")]))
            elapsed += s.t
        return "\n".join(lines) + "\n"


def greedy_descent(spec: DynamicsSpec, target: TargetSpec, profile, mu0: DiscreteMeasure, h: float,
                   max_iters: int = 1000) -> tuple[GreedyReport, Trajectory | None]:
    """Greedy (r, Q) descent toward the target.

    Each window of length ``r(sigma_i)`` (rounded to whole steps, at least one)
    is integrated with the steepest-descent policy of the argmax observable.
    The step ends at the first grid time where ``sigma`` has dropped by at
    least ``|Q(r(sigma_i), sigma_i)|``. If no grid time qualifies, the run stops
    with ``hit = False`` and a recorded failure.
    """
    sig0, _ = sigma(target, mu0)
    report = GreedyReport(sigma0=sig0, bound_T=time_bound(profile, max(sig0, 0.0)), h=h)
    mu = mu0
    elapsed = 0.0
    traj = None
    for _ in range(max_iters):
        sig, j = sigma(target, mu)
        if sig <= target.tol_member:
            report.hit = True
            report.hitting_time = elapsed
            break
        window = profile.r(sig)
        Qv = profile.Q(window, sig)
        K = max(1, int(round(window / h)))
        rounded = K * h > window * (1 + 1e-12)
        obs = target.observables[j]
        piece = integrate(spec, mu, SteepestDescent(obs.subgrad), K * h, h, t0=elapsed)
        sig_path = np.array([sigma(target, piece.measure_at(k))[0] for k in range(K + 1)])
        dec = sig_path - sig
        min_dec = float(dec[1:].min())
        ok_idx = np.flatnonzero(dec[1:] <= Qv)
        if ok_idx.size == 0:
            report.steps.append(GreedyStep(sig, window, K, rounded, Qv, 0.0, min_dec, min_dec,
                                           min_dec <= 2 * Qv, j))
            report.failure = "no grid time in the window reached the required decrease"
            break
        k = int(ok_idx[0]) + 1
        t_i = k * h
        report.steps.append(GreedyStep(sig, window, K, rounded, Qv, t_i, float(dec[k]), min_dec,
                                       min_dec <= 2 * Qv, j))
        piece = restrict_steps(piece, 0, k)
        traj = piece if traj is None else concatenate(traj, piece)
        mu = piece.final_measure()
        elapsed = traj.t0 + traj.duration
    else:
        report.budget_ok = budget_audit(report, profile)
        raise BudgetExceeded(f"no hit within {max_iters} greedy steps", report=report, trajectory=traj)
    report.budget_ok = budget_audit(report, profile)
    return report, traj


def budget_audit(report: GreedyReport, profile) -> bool:
    """``elapsed(i) + T(sigma_i) <= T(sigma_0) + 1e-6`` at every accepted step, with ``sigma`` decreasing."""
    if not report.steps:
        return True
    T0 = time_bound(profile, max(report.steps[0].sigma, 0.0))
    elapsed = 0.0
    prev = math.inf
    for s in report.steps:
        if s.t <= 0:
            break
        if not s.sigma < prev:
            return False
        if elapsed + time_bound(profile, max(s.sigma, 0.0)) > T0 + 1e-6:
            return False
        prev = s.sigma
        elapsed += s.t
    return True


# --- certificate for power-law profiles --------------------------------------


def pre_example_certificate(spec: DynamicsSpec, target: TargetSpec, mu: DiscreteMeasure, constants: dict,
                            h: float = 1e-3) -> dict:
    """Evaluate the sufficient conditions of the power-law attainability statement on one window.

    ``constants`` holds ``C2, C3, C4, alpha, beta, K``. The window has length
    ``t = min{1, 1/(2L), sigma^(1/beta)}`` rounded to the grid.
    """
    if target.p != 2:
        raise WrongOrder("the certificate is stated for p = 2")
    C2, C3, C4 = constants["C2"], constants["C3"], constants["C4"]
    alpha, beta, K = constants["alpha"], constants["beta"], constants["K"]
    sig, j = sigma(target, mu)
    obs = target.observables[j]
    L = spec.declared_L
    t_mu = min(1.0, 1.0 / (2.0 * L), max(sig, 0.0) ** (1.0 / beta))
    steps = max(1, int(round(t_mu / h)))
    t_mu = steps * h
    traj = integrate(spec, mu, SteepestDescent(obs.subgrad), t_mu, h)
    w = mu.weights
    xi = obs.subgrad(mu.points)
    v = traj.velocities[:, 0]
    pairing = math.fsum(w * np.einsum("ij,ij->i", xi, v))
    delta = row_norms((traj.paths[:, -1] - traj.paths[:, 0]) / t_mu ** (1.0 + alpha) - v)
    delta_l2 = math.sqrt(math.fsum(w * delta**2))
    v_l2 = math.sqrt(math.fsum(w * row_norms(v) ** 2))
    xi_l2 = math.sqrt(math.fsum(w * row_norms(xi) ** 2))
    combined = -C2 + C3 * xi_l2 * t_mu + 2.0 * obs.C_phi * (C3**2 * t_mu**2 + C4**2) * t_mu ** (alpha + 1.0)
    bullets = {
        "descent_pairing": {"value": pairing, "bound": -C2, "ok": pairing <= -C2 and C2 > 0},
        "curvature": {"value": delta_l2, "bound": C3 * t_mu, "ok": delta_l2 <= C3 * t_mu},
        "velocity_norm": {"value": v_l2, "bound": C4, "ok": v_l2 <= C4},
        "combined": {"value": combined, "bound": -2.0 * K * t_mu, "ok": combined <= -2.0 * K * t_mu},
    }
    return {"t_mu": t_mu, "sigma": sig, "bullets": bullets, "ok": all(b["ok"] for b in bullets.values())}


# --- oracle scenario -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HalfLineUnitBall:
    """Velocities in the closed unit ball of ``R^d``; target ``{x_1 <= 0}`` through ``d_S``.

    The exact minimum time is ``max_i d_S(x_i)`` over atoms with positive mass.
    """

    dim: int = 1
    p: float = 2.0

    @property
    def spec(self) -> DynamicsSpec:
        return DynamicsSpec(self.dim, ZeroDrift(self.dim), "none", 0.0, Ball(1.0, self.dim), declared_L=0.5)

    @property
    def set(self) -> HalfspaceSet:
        return HalfspaceSet(np.eye(self.dim)[0], 0.0)

    @property
    def target(self) -> TargetSpec:
        return TargetSpec([DistShifted(self.set, 0.0)], p=self.p)

    def exact_time(self, mu: DiscreteMeasure) -> float:
        d = self.set.distance(mu.points)
        return float(d[mu.weights > 0].max())

    def start(self, D: float) -> DiscreteMeasure:
        x = np.zeros((1, self.dim))
        x[0, 0] = D
        return new_measure(x)


def default_profile() -> PowerLaw:
    return PowerLaw(alpha=0.0, beta=2.0, K=0.25, L=0.5)


def _require_oracle(oracle):
    if not isinstance(oracle, HalfLineUnitBall):
        raise UnsupportedOracle(f"{type(oracle).__name__} has no analytic minimum time")


def dpp_audit(oracle, mu0: DiscreteMeasure, h: float, slow: float = 0.5) -> dict:
    """Dynamic programming checks on the analytic oracle.

    Along the steepest (optimal) run ``t + T(mu_t)`` must stay constant within
    ``2h``; along a run at ``slow`` times the speed it must be nondecreasing
    within ``2h``.
    """
    _require_oracle(oracle)
    T0 = oracle.exact_time(mu0)
    if T0 <= 0:
        return {"T0": 0.0, "optimal_max_deviation": 0.0, "slow_min_increment": 0.0,
                "constant_ok": True, "nondecreasing_ok": True}
    obs = oracle.target.observables[0]
    K = max(1, int(math.ceil(T0 / h - 1e-9)))
    spec = oracle.spec
    fast = integrate(spec, mu0, SteepestDescent(obs.subgrad), K * h, h)
    vals = np.array([fast.times[k] + oracle.exact_time(fast.measure_at(k)) for k in range(K + 1)])
    dev = float(np.abs(vals - T0).max())
    slow_run = integrate(spec, mu0, SteepestDescent(obs.subgrad, scale=slow), K * h, h)
    svals = np.array([slow_run.times[k] + oracle.exact_time(slow_run.measure_at(k)) for k in range(K + 1)])
    inc = float(np.diff(svals).min()) if K else 0.0
    running_min = float((svals - np.maximum.accumulate(svals)).min())
    return {
        "T0": T0,
        "optimal_max_deviation": dev,
        "slow_min_increment": inc,
        "slow_values": [float(v) for v in svals[:: max(1, K // 10)]],
        "constant_ok": dev <= 2 * h,
        "nondecreasing_ok": running_min >= -2 * h and inc >= -2 * h,
    }


def stla_probe(oracle, mu_hat: DiscreteMeasure, radii, n_per_radius: int, seed: int, h: float = 1e-3,
               profile=None, measure: str = "analytic") -> dict:
    """Hitting times of random measures within ``W_p`` distance ``delta`` of a member.

    Atoms are displaced by vectors of norm at most ``delta``. Times come from
    the analytic oracle or, with ``measure='greedy'``, from greedy runs.
    """
    _require_oracle(oracle)
    profile = profile or default_profile()
    target = oracle.target
    rows = []
    # sample j uses the same displacement directions at every radius, so the
    # per-radius maxima are comparable
    shapes = []
    for j in range(n_per_radius):
        rng = derive_rng(seed, "stla", j)
        g = rng.normal(size=mu_hat.points.shape)
        g /= np.maximum(row_norms(g), 1e-300)[:, None]
        shapes.append(g * rng.uniform(size=mu_hat.n)[:, None])
    for delta in radii:
        worst_t = 0.0
        bound_ok = True
        for g in shapes:
            mu = mu_hat if delta == 0 else _trusted(mu_hat.points + delta * g, mu_hat.weights)
            if measure == "greedy":
                rep, _ = greedy_descent(oracle.spec, target, profile, mu, h)
                t = rep.hitting_time
            else:
                t = oracle.exact_time(mu)
            sig = max(sigma(target, mu)[0], 0.0)
            bound_ok = bound_ok and t <= time_bound(profile, sig) + 2 * h
            worst_t = max(worst_t, t)
        rows.append({"delta": float(delta), "max_time": worst_t, "within_delta": worst_t <= delta + 2 * h,
                     "bound_ok": bound_ok})
    times = [r["max_time"] for r in rows]
    mono = all(b <= a + 2 * h for a, b in zip(times, times[1:]))
    return {"rows": rows, "monotone": mono, "ok": mono and all(r["bound_ok"] for r in rows)}
