import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wasstime.dynamics import AffineDrift, Ball, Box, ConstantDrift, DynamicsSpec, ZeroDrift
from wasstime.errors import EndpointMismatch, GridMismatch, OffGrid, PolicyOutOfBody, StepTooLarge
from wasstime.measures import new_measure
from wasstime.trajectories import (
    ConstantPolicy,
    Custom,
    SteepestDescent,
    Tracking,
    concatenate,
    continuity_residual,
    filippov_constant,
    filippov_track,
    initial_velocity_audit,
    integrate,
    moment_audit,
    register_policy,
    restrict,
    trajectory_from_csv,
    velocity_admissibility,
)
from wasstime.transport import wp


def null_spec(d=1):
    return DynamicsSpec(d, ZeroDrift(d), "none", 0.0, Ball(0.0, d), declared_L=1.0)


def drift_spec(e, L=0.5):
    e = np.asarray(e, dtype=float)
    return DynamicsSpec(e.size, ConstantDrift(e), "none", 0.0, Ball(0.0, e.size), declared_L=L)


def contraction_spec():
    return DynamicsSpec(1, ZeroDrift(1), "linear", -1.0, Ball(0.0, 1), declared_L=1.0)


def random_spec(rng, d=2, L=1.0):
    A = rng.normal(size=(d, d))
    A *= rng.uniform(0.1, 0.5) * L / np.linalg.norm(A, 2)
    return DynamicsSpec(d, AffineDrift(A, rng.normal(scale=0.3, size=d)), "linear",
                        rng.uniform(-0.5, 0.5) * L, Ball(1.0, d), declared_L=L)


def test_null_dynamics_is_static(rng):
    mu = new_measure(rng.normal(size=(5, 1)))
    traj = integrate(null_spec(), mu, ConstantPolicy(np.zeros(1)), 0.5, 0.05)
    assert all(traj.measure_at(k).same_atoms(mu) for k in range(traj.n_steps + 1))


def test_rigid_translation(rng):
    e = np.array([1.0, 0.0])
    mu = new_measure(rng.normal(size=(6, 2)))
    traj = integrate(drift_spec(e), mu, ConstantPolicy(np.zeros(2)), 1.0, 0.01)
    assert wp(traj.final_measure(), mu.translate(e)) <= 1e-12


def test_contraction_matches_exponential():
    mu = new_measure([[-1.0], [1.0]])
    traj = integrate(contraction_spec(), mu, ConstantPolicy(np.zeros(1)), 1.0, 1e-4)
    assert np.allclose(np.sort(traj.final_measure().points[:, 0]), [-math.exp(-1), math.exp(-1)], atol=1e-3)


def test_euler_contract_and_admissibility(rng):
    spec = random_spec(rng)
    traj = integrate(spec, new_measure(rng.normal(size=(8, 2))), ConstantPolicy(np.array([0.3, -0.4])), 0.2, 0.01)
    step = traj.paths[:, :-1] + traj.h * traj.velocities
    assert np.array_equal(step, traj.paths[:, 1:])
    assert velocity_admissibility(traj) <= 1e-9
    assert traj.measure_at(0).same_atoms(new_measure(traj.paths[:, 0], traj.weights))


def test_integrate_guards():
    mu = new_measure([[0.0]])
    with pytest.raises(StepTooLarge):
        integrate(null_spec(), mu, ConstantPolicy(np.zeros(1)), 0.1, 0.2)
    with pytest.raises(StepTooLarge):
        integrate(DynamicsSpec(1, ZeroDrift(1), "none", 0.0, Ball(0.0, 1), declared_L=10.0), mu,
                  ConstantPolicy(np.zeros(1)), 1.0, 0.05)
    with pytest.raises(GridMismatch):
        integrate(null_spec(), mu, ConstantPolicy(np.zeros(1)), 0.105, 0.01)
    with pytest.raises(PolicyOutOfBody):
        integrate(null_spec(), mu, ConstantPolicy(np.ones(1)), 0.1, 0.01)


def test_custom_policy_registry():
    @register_policy("half_left")
    def half_left(spec, mu, X, centers, k, t):
        return np.full((X.shape[0], 1), -0.5)

    spec = DynamicsSpec(1, ZeroDrift(1), "none", 0.0, Ball(1.0, 1), declared_L=1.0)
    traj = integrate(spec, new_measure([[1.0]]), Custom("half_left"), 1.0, 0.01)
    assert traj.final_measure().points[0, 0] == pytest.approx(0.5)
    assert traj.policy_id == "custom:half_left"


def test_concatenate_and_restrict(rng):
    e = np.array([0.0, 1.0])
    spec = drift_spec(e)
    mu = new_measure(rng.normal(size=(3, 2)))
    A = integrate(spec, mu, ConstantPolicy(np.zeros(2)), 1.0, 0.01)
    B = integrate(spec, A.final_measure(), ConstantPolicy(np.zeros(2)), 1.0, 0.01, t0=1.0)
    AB = concatenate(A, B)
    assert AB.duration == pytest.approx(2.0)
    assert wp(AB.final_measure(), mu.translate(2 * e)) <= 1e-12
    s = 0.37
    again = concatenate(restrict(AB, 0.0, s), restrict(AB, s, 2.0))
    assert np.array_equal(again.paths, AB.paths) and np.array_equal(again.velocities, AB.velocities)
    sub = restrict(restrict(AB, 0.2, 1.5), 0.5, 1.0)
    direct = restrict(AB, 0.5, 1.0)
    assert np.array_equal(sub.paths, direct.paths) and sub.t0 == pytest.approx(0.5)
    assert restrict(AB, 0.0, 2.0).paths.shape == AB.paths.shape
    with pytest.raises(OffGrid):
        restrict(AB, 0.005, 1.0)


def test_null_extension_adds_duration(rng):
    mu = new_measure(rng.normal(size=(3, 1)))
    spec = DynamicsSpec(1, ZeroDrift(1), "none", 0.0, Ball(1.0, 1), declared_L=1.0)
    A = integrate(spec, mu, ConstantPolicy(np.array([0.5])), 0.3, 0.01)
    rest = integrate(spec, A.final_measure(), ConstantPolicy(np.zeros(1)), 0.2, 0.01, t0=0.3)
    AB = concatenate(A, rest)
    assert AB.duration == pytest.approx(0.5) and AB.final_measure().same_atoms(A.final_measure())


def test_concatenate_rejects_mismatch(rng):
    spec = null_spec()
    A = integrate(spec, new_measure([[0.0]]), ConstantPolicy(np.zeros(1)), 0.1, 0.01)
    with pytest.raises(EndpointMismatch):
        concatenate(A, integrate(spec, new_measure([[1.0]]), ConstantPolicy(np.zeros(1)), 0.1, 0.01))
    with pytest.raises(GridMismatch):
        concatenate(A, integrate(spec, new_measure([[0.0]]), ConstantPolicy(np.zeros(1)), 0.1, 0.02))


def test_continuity_residual_examples(rng):
    mu = new_measure(rng.normal(size=(5, 2)))
    static = integrate(null_spec(2), mu, ConstantPolicy(np.zeros(2)), 0.1, 0.01)
    sq = lambda X: np.einsum("ij,ij->i", X, X)  # noqa: E731
    assert continuity_residual(static, sq, lambda X: 2 * X) == 0.0
    traj = integrate(random_spec(rng), mu, ConstantPolicy(np.array([0.2, 0.1])), 0.2, 0.01)
    a = np.array([0.3, -2.0])
    assert continuity_residual(traj, lambda X: X @ a + 1.0, lambda X: np.tile(a, (X.shape[0], 1))) <= 1e-12


def test_continuity_residual_first_order(rng):
    mu = new_measure(rng.normal(size=(6, 2)))
    spec = drift_spec([0.6, -0.8])
    sq = lambda X: np.minimum(np.einsum("ij,ij->i", X, X), 100.0)  # noqa: E731
    res = []
    for h in (0.01, 0.005):
        traj = integrate(spec, mu, ConstantPolicy(np.zeros(2)), 0.2, h)
        res.append(continuity_residual(traj, sq, lambda X: 2 * X))
    assert 0.3 <= res[1] / res[0] <= 0.7


def test_moment_audit_examples(rng):
    mu = new_measure(rng.normal(size=(6, 2)))
    static = integrate(null_spec(2), mu, ConstantPolicy(np.zeros(2)), 0.5, 0.01)
    rep = moment_audit(static, 2.0)
    assert rep["bound1_ok"] and rep["margins"][0] == pytest.approx((1.5 * math.exp(0.5) - 1) * rep["observed_max_moment"])
    tr = integrate(drift_spec([1.0, 0.0], L=0.01), mu, ConstantPolicy(np.zeros(2)), 0.5, 0.01)
    rep = moment_audit(tr, 2.0)
    assert rep["K_F"] == 1.0 and rep["max_particle_speed"] == pytest.approx(1.0)
    assert rep["bound1_ok"] and rep["bound2_ok"] and rep["bound3_ok"]
    con = integrate(contraction_spec(), new_measure([[-1.0], [1.0]]), ConstantPolicy(np.zeros(1)), 1.0, 1e-3)
    rep = moment_audit(con, 2.0)
    assert rep["bound1_ok"] and rep["bound2_ok"] and rep["bound3_ok"]


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_moment_bounds_randomized(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    u = rng.normal(size=2)
    u /= max(1.0, np.linalg.norm(u))
    traj = integrate(spec, new_measure(rng.normal(size=(12, 2))), ConstantPolicy(u), 0.3, 0.01)
    rep = moment_audit(traj, float(rng.choice([1.0, 2.0, 3.0])))
    assert min(rep["margins"]) >= 0


def test_filippov_identical_start(rng):
    spec = random_spec(rng)
    mu = new_measure(rng.normal(size=(6, 2)))
    A = integrate(spec, mu, ConstantPolicy(np.array([0.5, 0.0])), 0.5, 0.01)
    B, rep = filippov_track(A, mu, 2.0)
    assert rep.sup_distance <= 1e-9 and rep.satisfied and rep.sup_ratio == 0.0


def test_filippov_translate_under_constant_field(rng):
    eps = 1e-3
    spec = DynamicsSpec(2, ConstantDrift([0.2, 0.1]), "none", 0.0, Ball(1.0, 2), declared_L=eps)
    mu = new_measure(rng.normal(size=(5, 2)))
    A = integrate(spec, mu, ConstantPolicy(np.array([0.0, -0.7])), 0.5, 0.01)
    _, rep = filippov_track(A, mu.translate([0.3, 0.4]), 2.0)
    assert rep.sup_ratio == pytest.approx(1.0, abs=1e-9)
    assert rep.sup_ratio <= 2**0.5 * math.exp(eps * 0.5 * (2 + eps * math.exp(eps * 0.5)))


def test_filippov_constant_formula():
    L, T, p = 1.0, 0.5, 2.0
    assert filippov_constant(L, T, p) == pytest.approx(2 ** 0.5 * math.exp(0.5 * (2 + math.exp(0.5))), rel=1e-15)


def test_filippov_unequal_atoms(rng):
    spec = random_spec(rng)
    mu = new_measure(rng.normal(size=(5, 2)))
    nu = new_measure(rng.normal(size=(3, 2)), [0.2, 0.3, 0.5])
    A = integrate(spec, mu, ConstantPolicy(np.array([0.0, 0.5])), 0.5, 0.01)
    B, rep = filippov_track(A, nu, 2.0)
    assert rep.satisfied and velocity_admissibility(B) <= 1e-9
    assert wp(B.measure_at(0), nu) <= 1e-12


def test_initial_velocity_audit(rng):
    const = DynamicsSpec(2, ZeroDrift(2), "none", 0.0, Ball(1.0, 2), declared_L=1.0)
    mu = new_measure(rng.normal(size=(5, 2)))
    V = rng.normal(size=(5, 2))
    V /= np.maximum(1.0, np.linalg.norm(V, axis=1))[:, None]
    rep = initial_velocity_audit(const, mu, V, [0.01, 0.05, 0.1], 0.001)
    assert rep["ok"] and all(r["max_lhs"] <= 1e-12 for r in rep["checks"])
    con = DynamicsSpec(1, ZeroDrift(1), "linear", -1.0, Ball(0.5, 1), declared_L=1.0)
    mu = new_measure(np.linspace(-1, 1, 7).reshape(-1, 1))
    centers = con.centers(mu, mu.points)
    rep = initial_velocity_audit(con, mu, centers + 0.3, [0.01, 0.05, 0.1], 0.001)
    assert rep["ok"] and rep["selection_in_image"]


def test_csv_roundtrip(rng):
    spec = random_spec(rng)
    traj = integrate(spec, new_measure(rng.normal(size=(3, 2))), ConstantPolicy(np.array([0.1, 0.2])), 0.05, 0.01)
    text = traj.to_csv()
    assert text.splitlines()[0] == "t,particle,x_1,x_2,v_1,v_2,w"
    back = trajectory_from_csv(text, spec)
    assert np.array_equal(back.paths, traj.paths) and np.array_equal(back.velocities, traj.velocities)
    assert back.h == pytest.approx(traj.h)


def test_steepest_and_tracking_policies():
    spec = DynamicsSpec(2, ZeroDrift(2), "none", 0.0, Box([1.0, 1.0]), declared_L=1.0)
    mu = new_measure([[1.0, 1.0]])
    traj = integrate(spec, mu, SteepestDescent(lambda X: X), 0.1, 0.01)
    assert np.allclose(traj.velocities[0, 0], [-1.0, -1.0])
    assert integrate(spec, mu, SteepestDescent(lambda X: X, scale=0.5), 0.1, 0.01).policy_id == "steepest*0.5"
    tr = integrate(spec, mu, Tracking(np.array([[3.0, 0.2]])), 0.1, 0.01)
    assert np.allclose(tr.velocities[0, 0], [1.0, 0.2])
