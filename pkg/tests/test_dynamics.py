import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wasstime.dynamics import (
    AffineDrift,
    Ball,
    Box,
    ClampedAffineDrift,
    ConstantDrift,
    DynamicsSpec,
    Polytope,
    SetImage,
    SinusoidalDrift,
    ZeroDrift,
    distance_to_image,
    dynamics_from_dict,
    k_f,
    lipschitz_audit,
    project_batch,
    sample_body,
    support_argmin,
    velocity_set,
)
from wasstime.errors import BadParameter, DimensionMismatch
from wasstime.measures import dirac, new_measure

vec = lambda d: arrays(float, d, elements=st.floats(-3, 3, allow_nan=False))  # noqa: E731


def unit_ball_spec(d=2, **kw):
    return DynamicsSpec(d, ZeroDrift(d), "none", 0.0, Ball(1.0, d), declared_L=1.0, **kw)


def images():
    """A spread of images: scalar and matrix gains over all three body kinds."""
    rng = np.random.default_rng(3)
    G = rng.normal(size=(2, 3))
    return [
        SetImage(np.array([0.5, -0.2]), 2.0 * np.eye(2), Ball(0.7, 2), 2.0),
        SetImage(np.array([0.0, 1.0]), np.eye(2), Box([1.0, 0.3]), 1.0),
        SetImage(np.array([1.0, 0.0]), G, Ball(1.0, 3)),
        SetImage(np.array([0.0, 0.0]), G, Box([0.5, 1.0, 0.2])),
        SetImage(np.array([-1.0, 0.5]), np.eye(2), Polytope([[0, 0], [1, 0], [0, 1], [0.3, 0.3]]), 1.0),
    ]


def test_constant_inclusion_is_unit_ball(rng):
    spec = unit_ball_spec()
    for _ in range(3):
        img = velocity_set(spec, new_measure(rng.normal(size=(4, 2))), rng.normal(size=2))
        assert np.all(img.center == 0.0)


def test_linear_kernel_centers():
    spec = DynamicsSpec(1, ZeroDrift(1), "linear", 1.0, Ball(1.0, 1), declared_L=1.0)
    assert velocity_set(spec, dirac([2.0]), [5.0]).center[0] == pytest.approx(3.0)
    mu = new_measure([[1.0], [4.0]])
    assert velocity_set(spec, mu, [0.0]).center[0] == pytest.approx(-2.5)


def test_bounded_kernel_center():
    spec = DynamicsSpec(2, ZeroDrift(2), "bounded_lipschitz", 2.0, Ball(1.0, 2), declared_L=2.0)
    c = velocity_set(spec, dirac([0.0, 0.0]), [3.0, 4.0]).center
    assert np.allclose(c, 2.0 * np.array([3.0, 4.0]) / 6.0)


def test_support_examples():
    img = SetImage(np.zeros(2), np.eye(2), Ball(1.0, 2), 1.0)
    v, val, _ = support_argmin(img, [0.0, 1.0])
    assert np.allclose(v, [0.0, -1.0]) and val == -1.0
    v, val, _ = support_argmin(img, [0.0, 0.0])
    assert np.all(v == 0.0) and val == 0.0
    box = SetImage(np.zeros(2), np.eye(2), Box([1.0, 2.0]), 1.0)
    v, val, _ = support_argmin(box, [3.0, -1.0])
    assert np.allclose(v, [-1.0, 2.0]) and val == -5.0


def test_polytope_ties_go_to_lowest_index():
    img = SetImage(np.zeros(2), np.eye(2), Polytope([[1, 0], [1, 1], [1, -1]]), 1.0)
    _, _, u = support_argmin(img, [1.0, 0.0])
    assert np.allclose(u, [1, 0])


@pytest.mark.parametrize("k", range(5))
@given(q=vec(2))
def test_support_value_is_minimal(k, q):
    img = images()[k]
    v, val, _ = support_argmin(img, q)
    U = sample_body(img.body, 400, np.random.default_rng(k))
    others = img.center + U @ img.gain.T
    assert val <= (others @ q).min() + 1e-12
    assert distance_to_image(img, v)[0] <= 1e-9


def test_projection_examples():
    ball = SetImage(np.zeros(2), np.eye(2), Ball(1.0, 2), 1.0)
    d, p = distance_to_image(ball, [2.0, 0.0])
    assert d == 1.0 and np.allclose(p, [1.0, 0.0])
    d, p = distance_to_image(ball, [0.2, 0.3])
    assert d == 0.0 and np.allclose(p, [0.2, 0.3])
    box = SetImage(np.zeros(2), np.eye(2), Box([1.0, 1.0]), 1.0)
    d, p = distance_to_image(box, [3.0, 0.5])
    assert d == pytest.approx(2.0) and np.allclose(p, [1.0, 0.5])


@pytest.mark.parametrize("k", range(5))
@given(w=vec(2))
def test_projection_variational_inequality(k, w):
    img = images()[k]
    d, proj = distance_to_image(img, w)
    assert abs(d - np.linalg.norm(w - proj)) <= 1e-12
    assert distance_to_image(img, proj)[0] <= 1e-9
    U = sample_body(img.body, 200, np.random.default_rng(k + 10))
    Z = img.center + U @ img.gain.T
    # <w - proj, z - proj> <= 0 for every z in the image
    assert np.max((Z - proj) @ (w - proj)) <= 1e-7 * (1 + np.linalg.norm(w))


@pytest.mark.parametrize("k", range(5))
def test_midpoints_stay_in_image(k):
    img = images()[k]
    rng = np.random.default_rng(k)
    U = sample_body(img.body, 40, rng)
    Z = img.center + U @ img.gain.T
    for a, b in zip(Z[::2], Z[1::2]):
        assert distance_to_image(img, 0.5 * (a + b))[0] <= 1e-10


def test_scipy_agrees_on_general_gain_projection():
    from scipy.optimize import minimize

    img = images()[3]
    w = np.array([2.0, -1.5])
    d, _ = distance_to_image(img, w)
    h = img.body.halfwidths
    res = minimize(lambda u: np.sum((img.center + img.gain @ u - w) ** 2), np.zeros(3),
                   bounds=list(zip(-h, h)), method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12})
    assert d == pytest.approx(math.sqrt(res.fun), abs=1e-6)


def test_k_f_examples():
    assert k_f(unit_ball_spec()) == 1.0
    pure = DynamicsSpec(2, ConstantDrift([1.0, 0.0]), "none", 0.0, Ball(0.0, 2), declared_L=1.0)
    assert k_f(pure) == 1.0
    box = DynamicsSpec(2, ConstantDrift([1.0, 0.0]), "linear", 1.0, Box([2.0, 0.0]), declared_L=1.0)
    assert k_f(box) == 3.0


def test_k_f_matches_sampled_directions():
    spec = DynamicsSpec(2, ConstantDrift([0.3, -0.4]), "none", 0.0, Ball(0.8, 2), declared_L=1.0, gain=1.5)
    img = velocity_set(spec, dirac([0.0, 0.0]), [0.0, 0.0])
    ang = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    pts = [support_argmin(img, [math.cos(a), math.sin(a)])[0] for a in ang]
    assert k_f(spec) == pytest.approx(max(np.linalg.norm(p) for p in pts), abs=1e-4)
    assert k_f(spec) == pytest.approx(0.5 + 1.2, abs=1e-12)


def test_lipschitz_audit_examples():
    const = DynamicsSpec(2, ConstantDrift([1.0, 2.0]), "none", 0.0, Ball(1.0, 2), declared_L=0.1)
    rep = lipschitz_audit(const, 2.0, 50, seed=1)
    assert rep["max_ratio"] == 0.0 and not rep["violation"]
    A = np.array([[0.0, 2.0], [-1.0, 0.5]])
    nA = np.linalg.norm(A, 2)
    good = DynamicsSpec(2, AffineDrift(A, [0.0, 0.0]), "none", 0.0, Ball(1.0, 2), declared_L=nA)
    assert not lipschitz_audit(good, 2.0, 200, seed=1)["violation"]
    bad = DynamicsSpec(2, AffineDrift(A, [0.0, 0.0]), "none", 0.0, Ball(1.0, 2), declared_L=nA / 2)
    rep = lipschitz_audit(bad, 2.0, 200, seed=1)
    assert rep["violation"] and "sampled" in rep["region"]


def test_interaction_lipschitz_audit():
    spec = DynamicsSpec(2, ZeroDrift(2), "linear", 0.7, Box([1.0, 1.0]), declared_L=0.7 * 2)
    rep = lipschitz_audit(spec, 2.0, 100, seed=3)
    assert not rep["violation"] and rep["max_ratio"] <= 1.4


def test_drift_lipschitz_constants(rng):
    A = rng.normal(size=(2, 2))
    for drift in [AffineDrift(A, [1.0, 0.0]), ClampedAffineDrift(A, [0.0, 0.0], 0.5), SinusoidalDrift(2, 0.7, 3.0)]:
        X = rng.normal(size=(200, 2))
        Y = X + rng.normal(scale=0.1, size=X.shape)
        ratio = np.linalg.norm(drift(X) - drift(Y), axis=1) / np.linalg.norm(X - Y, axis=1)
        assert ratio.max() <= drift.lipschitz * (1 + 1e-12)


def test_spec_validation():
    with pytest.raises(BadParameter):
        DynamicsSpec(1, ZeroDrift(1), "cubic", 0.0, Ball(1.0, 1), declared_L=1.0)
    with pytest.raises(BadParameter):
        DynamicsSpec(1, ZeroDrift(1), "none", 0.0, Ball(1.0, 1), declared_L=0.0)
    with pytest.raises(DimensionMismatch):
        DynamicsSpec(2, ZeroDrift(2), "none", 0.0, Ball(1.0, 3), declared_L=1.0)
    with pytest.raises(BadParameter):
        Ball(-1.0, 2)


def test_dynamics_record_roundtrip():
    spec = DynamicsSpec(2, AffineDrift([[0.0, 1.0], [0.0, 0.0]], [1.0, 0.0]), "linear", -0.5,
                        Polytope([[0.0], [1.0]]), declared_L=2.0, gain=[[1.0], [0.5]])
    assert dynamics_from_dict(spec.to_dict(), 2) == spec


def test_project_batch_matches_single(rng):
    spec = DynamicsSpec(2, ZeroDrift(2), "linear", 0.3, Box([0.5, 1.0]), declared_L=1.0)
    mu = new_measure(rng.normal(size=(6, 2)))
    centers = spec.centers(mu, mu.points)
    W = rng.normal(scale=2, size=(6, 2))
    d, P, _ = project_batch(centers, spec, W)
    for i in range(6):
        img = velocity_set(spec, mu, mu.points[i])
        di, pi = distance_to_image(img, W[i])
        assert di == pytest.approx(d[i], abs=1e-12) and np.allclose(pi, P[i])
