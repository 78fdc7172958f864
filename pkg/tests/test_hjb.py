import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from wasstime.dynamics import AffineDrift, Ball, Box, ConstantDrift, DynamicsSpec, Polytope, ZeroDrift
from wasstime.errors import BadOrder, DimensionMismatch, MemberMeasure, UnsupportedOracle
from wasstime.hjb import CovectorField, hamiltonian, min_pairing, petrov_check, supersolution_probe
from wasstime.measures import new_measure
from wasstime.mintime import HalfLineUnitBall
from wasstime.targets import BallSet, DistShifted, HalfspaceSet, TargetSpec

ORACLE = HalfLineUnitBall()


def unit_ball(d=2):
    return DynamicsSpec(d, ZeroDrift(d), "none", 0.0, Ball(1.0, d), declared_L=0.5)


def random_spec(rng, body):
    A = rng.normal(size=(2, 2)) * 0.2
    return DynamicsSpec(2, AffineDrift(A, rng.normal(size=2)), "linear", 0.3, body, declared_L=2.0)


def test_zero_covector_gives_minus_one(rng):
    mu = new_measure(rng.normal(size=(4, 2)))
    assert hamiltonian(unit_ball(), mu, np.zeros((4, 2))) == -1.0


def test_unit_ball_closed_form(rng):
    mu = new_measure(rng.normal(size=(5, 2)), rng.dirichlet(np.ones(5)))
    q = rng.normal(size=(5, 2))
    expected = -1.0 + float(mu.weights @ np.linalg.norm(q, axis=1))
    assert hamiltonian(unit_ball(), mu, q) == pytest.approx(expected, abs=1e-12)
    q /= np.linalg.norm(q, axis=1)[:, None]
    assert hamiltonian(unit_ball(), mu, q) == pytest.approx(0.0, abs=1e-12)


def test_pure_drift(rng):
    e = np.array([0.4, -1.2])
    spec = DynamicsSpec(2, ConstantDrift(e), "none", 0.0, Ball(0.0, 2), declared_L=0.5)
    mu = new_measure(rng.normal(size=(3, 2)), [0.2, 0.3, 0.5])
    q = rng.normal(size=(3, 2))
    assert hamiltonian(spec, mu, q) == pytest.approx(-1.0 - float(mu.weights @ (q @ e)), abs=1e-12)


def test_polytope_pairing_matches_linprog(rng):
    V = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -0.5], [0.3, -1.0]])
    spec = random_spec(rng, Polytope(V))
    mu = new_measure(rng.normal(size=(4, 2)))
    q = rng.normal(size=(4, 2))
    centers = spec.centers(mu, mu.points)
    total = 0.0
    for i in range(4):
        res = linprog(q[i] @ V.T, A_eq=np.ones((1, 4)), b_eq=[1.0], bounds=[(0, None)] * 4, method="highs")
        total += mu.weights[i] * (q[i] @ centers[i] + res.fun)
    assert min_pairing(spec, mu, q) == pytest.approx(total, abs=1e-9)


def test_covector_validation():
    with pytest.raises(BadOrder):
        CovectorField(np.zeros((1, 1)), 1.0)
    assert CovectorField(np.zeros((1, 1)), 3.0).order_dual == pytest.approx(1.5)
    with pytest.raises(DimensionMismatch):
        hamiltonian(unit_ball(), new_measure([[0.0, 0.0]]), np.zeros((2, 2)))


def test_petrov_unit_ball(rng):
    target = TargetSpec([DistShifted(BallSet([0.0, 0.0], 0.5))])
    mu = new_measure(rng.normal(size=(5, 2)) * 3 + 2.0)
    value, strict = petrov_check(unit_ball(), target, mu)
    xi = target.observables[0].subgrad(mu.points)
    assert value == pytest.approx(-float(mu.weights @ np.linalg.norm(xi, axis=1)), abs=1e-9)
    assert strict


def test_petrov_null_dynamics():
    null = DynamicsSpec(1, ZeroDrift(1), "none", 0.0, Ball(0.0, 1), declared_L=0.5)
    assert petrov_check(null, ORACLE.target, ORACLE.start(0.7)) == (0.0, False)


def test_petrov_drift_away():
    spec = DynamicsSpec(1, ConstantDrift([1.0]), "none", 0.0, Ball(0.0, 1), declared_L=0.5)
    value, strict = petrov_check(spec, ORACLE.target, ORACLE.start(0.7))
    assert value > 0 and not strict


def test_petrov_member_raises():
    with pytest.raises(MemberMeasure):
        petrov_check(unit_ball(1), ORACLE.target, ORACLE.start(-1.0))


@pytest.mark.parametrize("D", [0.8, 2.0])
def test_supersolution_on_diracs(D):
    assert supersolution_probe(ORACLE, ORACLE.start(D)) is True
    assert hamiltonian(ORACLE.spec, ORACLE.start(D), [[1.0]]) == pytest.approx(0.0, abs=1e-15)


def test_supersolution_skips_and_guards():
    assert supersolution_probe(ORACLE, ORACLE.start(-0.1)) is None
    assert supersolution_probe(ORACLE, new_measure([[0.8], [0.5]])) is None
    with pytest.raises(UnsupportedOracle):
        supersolution_probe(object(), ORACLE.start(0.8))


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.sampled_from(["ball", "box", "polytope"]))
def test_inf_part_concave(seed, s, kind):
    rng = np.random.default_rng(seed)
    body = {"ball": Ball(0.7, 2), "box": Box([0.5, 1.0]),
            "polytope": Polytope(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]))}[kind]
    spec = random_spec(rng, body)
    mu = new_measure(rng.normal(size=(4, 2)))
    q1, q2 = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    mid = min_pairing(spec, mu, s * q1 + (1 - s) * q2)
    assert mid >= s * min_pairing(spec, mu, q1) + (1 - s) * min_pairing(spec, mu, q2) - 1e-9


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_inf_part_homogeneous(seed, lam):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, Ball(0.7, 2))
    mu = new_measure(rng.normal(size=(4, 2)))
    q = rng.normal(size=(4, 2))
    base = min_pairing(spec, mu, q)
    assert min_pairing(spec, mu, lam * q) == pytest.approx(lam * base, abs=1e-10 * max(1.0, lam * abs(base)))


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_petrov_matches_dual_norm_on_balls(seed):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.1, 2.0)
    spec = DynamicsSpec(2, ZeroDrift(2), "none", 0.0, Ball(r, 2), declared_L=0.5)
    target = TargetSpec([DistShifted(HalfspaceSet(rng.normal(size=2), -1.0))])
    mu = new_measure(rng.normal(size=(3, 2)) * 3)
    if target.observables[0].value(mu.points) @ mu.weights <= target.tol_member:
        return
    xi = target.observables[0].subgrad(mu.points)
    value, _ = petrov_check(spec, target, mu)
    assert value == pytest.approx(-r * float(mu.weights @ np.linalg.norm(xi, axis=1)), abs=1e-9)
