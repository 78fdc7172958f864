"""Invariant suites behind ``wasstime verify``.

Each suite runs a fixed list of randomized checks derived from one seed and
returns a report dict with no timings, so equal seeds give byte-identical
JSON.
"""
from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from . import _backend
from ._util import derive_rng, dumps
from .dynamics import AffineDrift, Ball, Box, ConstantDrift, DynamicsSpec, ZeroDrift
from .hjb import hamiltonian, min_pairing, petrov_check, supersolution_probe
from .measures import Equispaced, _trusted, dirac, moment_p, new_measure, sample_density
from .mintime import (
    HalfLineUnitBall,
    PowerLaw,
    budget_audit,
    closed_form_bound,
    default_profile,
    dpp_audit,
    greedy_descent,
    stla_probe,
    time_bound,
    time_bound_quadrature,
)
from .targets import (
    BallSet,
    DistShifted,
    HalfspaceSet,
    PROJECTION_UPPER_BOUND,
    TargetSpec,
    bump_family,
    generalized_distance,
    geodesic_convexity_audit,
    semiconcavity_audit,
    sigma,
)
from .trajectories import (
    ConstantPolicy,
    concatenate,
    continuity_residual,
    filippov_constant,
    filippov_track,
    integrate,
    moment_audit,
    restrict,
)
from .transport import GeodesicSpec, cost_matrix, verify_constant_speed, wp, wp_distance

SUITES = ("transport", "trajectories", "targets", "mintime", "hjb")


# --- random inputs ---------------------------------------------------------


def random_measure(rng, n: int, d: int, equal: bool = True, scale: float = 1.0):
    pts = rng.normal(scale=scale, size=(n, d))
    w = None if equal else rng.uniform(0.1, 1.0, size=n)
    if w is not None:
        w = w / w.sum()
    return new_measure(pts, w)


def random_lipschitz_spec(rng, d: int, L: float = 1.0, kernel: str = "linear") -> DynamicsSpec:
    """Affine drift plus interaction with ``Lip(b) + |c| <= L``; unit-ball controls."""
    A = rng.normal(size=(d, d))
    A *= rng.uniform(0.1, 0.5) * L / np.linalg.norm(A, 2)
    c = rng.uniform(-0.5, 0.5) * L
    return DynamicsSpec(d, AffineDrift(A, rng.normal(scale=0.3, size=d)), kernel, c, Ball(1.0, d), declared_L=L)


def brute_force_cost(mu, nu, p: float) -> float:
    """Minimum over all permutations of the assignment cost (equal weights)."""
    C = cost_matrix(mu.points, nu.points, p)
    n = mu.n
    best = min(math.fsum(C[i, s[i]] for i in range(n)) for s in itertools.permutations(range(n)))
    return best / n


# --- suite plumbing ----------------------------------------------------------


def _check(name: str, ok: bool, **detail) -> dict:
    return {"name": name, "ok": bool(ok), "detail": detail}


def _transport(seed: int) -> list[dict]:
    out = []
    rng = derive_rng(seed, "transport", "exact")
    worst = 0.0
    for _ in range(60):
        n, d, p = int(rng.integers(1, 7)), int(rng.integers(1, 4)), float(rng.choice([1, 2, 3]))
        mu, nu = random_measure(rng, n, d), random_measure(rng, n, d)
        w, _ = wp_distance(mu, nu, p)
        worst = max(worst, abs(w**p - brute_force_cost(mu, nu, p)))
    out.append(_check("assignment_matches_enumeration", worst <= 1e-9, max_abs_error=worst, cases=60))

    rng = derive_rng(seed, "transport", "moment")
    worst = 0.0
    for _ in range(30):
        p = float(rng.choice([1, 2, 3]))
        mu = random_measure(rng, int(rng.integers(1, 12)), int(rng.integers(1, 4)), equal=False)
        worst = max(worst, abs(wp(dirac(np.zeros(mu.dim)), mu, p) - moment_p(mu, p)))
    out.append(_check("dirac_distance_is_moment", worst <= 1e-12, max_abs_error=worst, cases=30))

    rng = derive_rng(seed, "transport", "metric")
    worst_sym, worst_tri = 0.0, -math.inf
    for _ in range(30):
        p = float(rng.choice([1, 2, 3]))
        d = int(rng.integers(1, 4))
        a, b, c = (random_measure(rng, int(rng.integers(1, 8)), d, equal=False) for _ in range(3))
        ab, ba = wp(a, b, p), wp(b, a, p)
        worst_sym = max(worst_sym, abs(ab - ba))
        worst_tri = max(worst_tri, ab - wp(a, c, p) - wp(c, b, p))
    out.append(_check("symmetry_and_triangle", worst_sym <= 1e-9 and worst_tri <= 1e-9,
                      max_asymmetry=worst_sym, max_triangle_excess=worst_tri))

    rng = derive_rng(seed, "transport", "geodesic")
    worst = 0.0
    for _ in range(8):
        p = float(rng.choice([1, 2, 3]))
        mu, nu = random_measure(rng, 8, 2), random_measure(rng, 8, 2)
        g = GeodesicSpec.between(mu, nu, p)
        worst = max(worst, verify_constant_speed(g, p, np.linspace(0, 1, 5))["max_relative_error"])
    out.append(_check("constant_speed_geodesics", worst <= 1e-7, max_relative_error=worst, cases=8))

    impls = _backend.implementations()
    rng = derive_rng(seed, "transport", "backends")
    worst = 0.0
    for _ in range(20):
        m, n = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        a, b = rng.uniform(0.1, 1, m), rng.uniform(0.1, 1, n)
        a, b = a / a.sum(), b / b.sum()
        C = rng.uniform(size=(m, n))
        costs = []
        for mod in impls.values():
            r, c, f = mod.transport_simplex(a, b, C)
            costs.append(math.fsum(f * C[r, c]))
        worst = max(worst, max(costs) - min(costs))
    out.append(_check("backends_agree", worst <= 1e-12, max_cost_spread=worst, backends=sorted(impls)))
    return out


def _trajectories(seed: int) -> list[dict]:
    out = []
    rng = derive_rng(seed, "trajectories", "moments")
    margins = []
    for _ in range(6):
        spec = random_lipschitz_spec(rng, 2)
        mu = random_measure(rng, 16, 2)
        u = rng.normal(size=2)
        u /= max(1.0, np.linalg.norm(u))
        traj = integrate(spec, mu, ConstantPolicy(u), 0.5, 1e-3 * 5)
        rep = moment_audit(traj, 2.0, seed=seed)
        margins.append(min(rep["margins"]))
    out.append(_check("moment_bounds", min(margins) >= 0, min_margin=min(margins), cases=len(margins)))

    rng = derive_rng(seed, "trajectories", "filippov")
    ratios = []
    const = filippov_constant(1.0, 0.5, 2.0)
    for _ in range(4):
        spec = random_lipschitz_spec(rng, 2)
        muA = random_measure(rng, 8, 2)
        muB = _trusted(muA.points + rng.normal(scale=0.1, size=muA.points.shape), muA.weights)
        trajA = integrate(spec, muA, ConstantPolicy(np.array([0.6, 0.0])), 0.5, 0.01)
        _, rep = filippov_track(trajA, muB, 2.0)
        ratios.append(rep.sup_ratio)
    _, same = filippov_track(trajA, muA, 2.0)
    out.append(_check("filippov_bound", max(ratios) <= const * (1 + 1e-6) and same.sup_distance <= 1e-9,
                      max_ratio=max(ratios), constant=const, identical_start_sup=same.sup_distance))

    rng = derive_rng(seed, "trajectories", "continuity")
    spec = random_lipschitz_spec(rng, 2)
    traj = integrate(spec, random_measure(rng, 10, 2), ConstantPolicy(np.array([0.0, 0.5])), 0.2, 0.01)
    phi = lambda X: np.sin(X[:, 0]) + X[:, 1] ** 2  # noqa: E731
    grad = lambda X: np.stack([np.cos(X[:, 0]), 2 * X[:, 1]], axis=1)  # noqa: E731
    res = continuity_residual(traj, phi, grad)
    vmax = float(np.abs(traj.velocities).max())
    bound = traj.h * vmax**2 * 2.0
    out.append(_check("continuity_residual_order_h", res <= bound, residual=res, bound=bound))

    a, b = traj.t0 + 5 * traj.h, traj.t0 + 12 * traj.h
    joined = concatenate(concatenate(restrict(traj, traj.t0, a), restrict(traj, a, b)),
                         restrict(traj, b, traj.t0 + traj.duration))
    err = float(np.abs(joined.paths - traj.paths).max())
    out.append(_check("restrict_concatenate_roundtrip", err == 0.0, max_abs_error=err))
    return out


def _targets(seed: int) -> list[dict]:
    out = []
    mu = sample_density(Equispaced(-0.5, 0.5), 2000)
    s12 = sigma(TargetSpec(bump_family(1.0 / 12.0)), mu)[0]
    s24 = sigma(TargetSpec(bump_family(1.0 / 24.0)), mu)[0]
    out.append(_check("bump_example_sigma", abs(s12) <= 2e-3 and abs(s24 + 1.0 / 24.0) <= 2e-3,
                      sigma_eps_12=s12, sigma_eps_24=s24))

    origin = TargetSpec([DistShifted(BallSet(np.zeros(2), 0.0), 0.0)], p=2.0)
    errs, dvals = [], []
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
        nu = new_measure([[1.0, 0.0], [0.0, math.sqrt(2.0)]], [lam, 1.0 - lam]) if 0 < lam < 1 else \
            dirac([1.0, 0.0] if lam == 1.0 else [0.0, math.sqrt(2.0)])
        d = generalized_distance(origin, nu)
        dvals.append(d)
        errs.append(abs(d**2 - (2.0 - lam)))
    violation = dvals[2] - 0.5 * (dvals[0] + dvals[4])
    out.append(_check("two_point_nonconvexity", max(errs) <= 1e-9 and violation > 0,
                      max_error=max(errs), midpoint_excess=violation))

    rng = derive_rng(seed, "targets", "semiconcavity")
    worst = 0.0
    for _ in range(15):
        nrm = rng.normal(size=2)
        tgt = TargetSpec([DistShifted(HalfspaceSet(nrm / np.linalg.norm(nrm), rng.normal()), 0.0)], p=2.0)
        rep = semiconcavity_audit(tgt, random_measure(rng, 6, 2, scale=2.0), random_measure(rng, 6, 2, scale=2.0))
        worst = max(worst, rep["min_feasible_C"])
    out.append(_check("p2_semiconcavity_constant", worst <= 1 + 1e-6, max_C=worst, cases=15))

    rng = derive_rng(seed, "targets", "convexity")
    worst = -math.inf
    S = BallSet(np.zeros(2), 1.0)
    tgt = TargetSpec([DistShifted(S, 0.2)], p=2.0)
    for _ in range(15):
        pts = [S.project(rng.normal(scale=1.5, size=(6, 2))) for _ in range(2)]
        rep = geodesic_convexity_audit(tgt, new_measure(pts[0]), new_measure(pts[1]))
        worst = max(worst, rep["max_sigma"])
    out.append(_check("strong_geodesic_convexity", worst <= 1e-9, max_sigma=worst, cases=15))

    tgt = TargetSpec([DistShifted(HalfspaceSet([1.0], 0.0), 0.0)], p=2.0)
    d_up = generalized_distance(tgt, new_measure([[0.5], [-1.0]]), PROJECTION_UPPER_BOUND)
    out.append(_check("halfspace_distance", abs(d_up - math.sqrt(0.125)) <= 1e-15, value=d_up))
    return out


def _mintime(seed: int) -> list[dict]:
    out = []
    rng = derive_rng(seed, "mintime", "closed_form")
    worst, worst_knot = 0.0, 0.0
    for _ in range(60):
        a = rng.uniform(0, 2)
        b = a + 1.05 + rng.uniform(0, 3)
        K, L, s = rng.uniform(0.1, 3), rng.uniform(0.05, 3), rng.uniform(0, 5)
        worst = max(worst, abs(closed_form_bound(a, b, K, L, s) - time_bound_quadrature(PowerLaw(a, b, K, L), s)))
        knot = min(1.0, (2 * L) ** (-b))
        left = b * knot ** ((b - a - 1) / b) / (K * (b - a - 1))
        worst_knot = max(worst_knot, abs(left - closed_form_bound(a, b, K, L, knot)),
                         abs(closed_form_bound(a, b, K, L, np.nextafter(knot, 2.0)) - left))
    out.append(_check("closed_form_matches_quadrature", worst <= 1e-6 and worst_knot <= 1e-12,
                      max_abs_error=worst, max_knot_jump=worst_knot))

    oracle = HalfLineUnitBall()
    prof = default_profile()
    h = 1e-3
    rep, _ = greedy_descent(oracle.spec, oracle.target, prof, oracle.start(0.8), h)
    dpp = dpp_audit(oracle, oracle.start(0.8), h)
    ok = (rep.hit and abs(rep.hitting_time - 0.8) <= 2 * h and dpp["constant_ok"] and dpp["nondecreasing_ok"]
          and rep.bound_T >= rep.hitting_time and rep.budget_ok)
    out.append(_check("oracle_hitting_time_and_dpp", ok, hitting_time=rep.hitting_time, bound_T=rep.bound_T,
                      optimal_max_deviation=dpp["optimal_max_deviation"], budget_ok=rep.budget_ok))

    rng = derive_rng(seed, "mintime", "budget")
    all_ok, hits = True, 0
    for _ in range(4):
        pts = rng.uniform(-0.3, 1.0, size=(int(rng.integers(1, 5)), 1))
        mu = new_measure(pts)
        r, _ = greedy_descent(oracle.spec, oracle.target, prof, mu, h)
        if r.hit:
            hits += 1
            all_ok = all_ok and budget_audit(r, prof) and abs(r.hitting_time - oracle.exact_time(mu)) <= 2 * h
    out.append(_check("randomized_budget_audit", all_ok and hits > 0, hits=hits))

    st = stla_probe(oracle, dirac([0.0]), [0.2, 0.1, 0.05], 4, seed)
    out.append(_check("stla_probe", st["ok"] and all(r["within_delta"] for r in st["rows"]),
                      max_times=[r["max_time"] for r in st["rows"]]))
    mono = all(time_bound(prof, x) <= time_bound(prof, y) for x, y in zip(np.linspace(0, 3, 31), np.linspace(0.1, 3.1, 31)))
    out.append(_check("time_bound_monotone", mono))
    return out


def _hjb(seed: int) -> list[dict]:
    out = []
    rng = derive_rng(seed, "hjb", "closed_form")
    worst = 0.0
    for _ in range(40):
        d = int(rng.integers(1, 4))
        spec = DynamicsSpec(d, ZeroDrift(d), "none", 0.0, Ball(1.0, d), declared_L=1.0)
        mu = random_measure(rng, int(rng.integers(1, 10)), d, equal=False)
        q = rng.normal(size=mu.points.shape)
        expect = -1.0 + math.fsum(mu.weights * np.linalg.norm(q, axis=1))
        worst = max(worst, abs(hamiltonian(spec, mu, q) - expect))
    out.append(_check("ball_hamiltonian_closed_form", worst <= 1e-9, max_abs_error=worst))

    rng = derive_rng(seed, "hjb", "petrov")
    strict_all = True
    spec = DynamicsSpec(2, ZeroDrift(2), "none", 0.0, Ball(1.0, 2), declared_L=1.0)
    null = DynamicsSpec(2, ZeroDrift(2), "none", 0.0, Ball(0.0, 2), declared_L=1.0)
    tgt = TargetSpec([DistShifted(BallSet(np.zeros(2), 0.5), 0.0)], p=2.0)
    null_strict = False
    for _ in range(10):
        mu = new_measure(rng.normal(size=(5, 2)) * 0.5 + np.array([2.0, 0.0]))
        strict_all = strict_all and petrov_check(spec, tgt, mu)[1]
        null_strict = null_strict or petrov_check(null, tgt, mu)[1]
    out.append(_check("petrov_sign", strict_all and not null_strict, strict_ball=strict_all, strict_null=null_strict))

    rng = derive_rng(seed, "hjb", "concavity")
    worst_c, worst_h = -math.inf, 0.0
    spec = DynamicsSpec(2, ConstantDrift([0.3, -0.1]), "none", 0.0, Box([1.0, 0.5]), declared_L=1.0)
    for _ in range(20):
        mu = random_measure(rng, 6, 2, equal=False)
        q1, q2 = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
        s, lam = rng.uniform(), rng.uniform(0.1, 5)
        lhs = min_pairing(spec, mu, s * q1 + (1 - s) * q2)
        worst_c = max(worst_c, s * min_pairing(spec, mu, q1) + (1 - s) * min_pairing(spec, mu, q2) - lhs)
        worst_h = max(worst_h, abs(min_pairing(spec, mu, lam * q1) - lam * min_pairing(spec, mu, q1)))
    out.append(_check("concave_and_homogeneous", worst_c <= 1e-9 and worst_h <= 1e-10,
                      max_concavity_excess=worst_c, max_homogeneity_error=worst_h))

    oracle = HalfLineUnitBall()
    probes = [supersolution_probe(oracle, dirac([x])) for x in (0.8, 2.0, 0.3)]
    out.append(_check("supersolution_probe", all(probes), probes=probes))
    return out


_RUNNERS: dict[str, Callable[[int], list[dict]]] = {
    "transport": _transport,
    "trajectories": _trajectories,
    "targets": _targets,
    "mintime": _mintime,
    "hjb": _hjb,
}


def run_suite(name: str, seed: int = 0) -> dict:
    """Run one suite (or ``all``) and return its report."""
    names = SUITES if name == "all" else (name,)
    for n in names:
        if n not in _RUNNERS:
            raise KeyError(f"unknown suite {n!r}")
    suites = {n: _RUNNERS[n](seed) for n in names}
    passed = all(c["ok"] for checks in suites.values() for c in checks)
    return {"seed": seed, "suite": name, "passed": passed, "suites": suites}


def report_json(report: dict) -> str:
    return dumps(report)


def report_table(report: dict) -> str:
    lines = []
    for suite, checks in report["suites"].items():
        for c in checks:
            lines.append(f"{'PASS' if c['ok'] else 'FAIL'}  {suite:<13} {c['name']}")
    return "\n".join(lines)
