"""Set-valued velocity fields ``F(mu, x) = a(mu, x) + R U``.

The drift part is ``a(mu, x) = b(x) + c * sum_j w_j k(x - y_j)``; ``R`` is a
constant gain matrix and ``U`` a convex compact control body. Everything the
rest of the package needs from ``F`` (support minimizers, metric projections,
``K_F`` and a Lipschitz audit) lives here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _backend
from ._geometry import project_ellipsoid, project_hull
from ._util import derive_rng, row_norms
from .errors import BadParameter, DimensionMismatch, NonFinite, ProjectionNotConverged
from .measures import DiscreteMeasure, new_measure
from .transport import wp

CERT_TOL = 1e-8
MAX_BOX_VERTICES_DIM = 12


# --- control bodies --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ball:
    radius: float
    ctrl_dim: int

    def __post_init__(self):
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise BadParameter("ball radius must be finite and >= 0")
        if self.ctrl_dim < 1:
            raise BadParameter("ball needs ctrl_dim >= 1")

    @property
    def dim(self) -> int:
        return self.ctrl_dim

    def contains(self, u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return row_norms(np.atleast_2d(u)) <= self.radius + tol

    def vertices(self):
        return None

    def to_dict(self):
        return {"kind": "ball", "radius": self.radius, "ctrl_dim": self.ctrl_dim}


@dataclass(frozen=True, eq=False)
class Box:
    halfwidths: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.halfwidths, dtype=float).reshape(-1)
        if h.size == 0 or np.any(h < 0) or not np.all(np.isfinite(h)):
            raise BadParameter("box halfwidths must be finite and >= 0")
        h.setflags(write=False)
        object.__setattr__(self, "halfwidths", h)

    @property
    def dim(self) -> int:
        return self.halfwidths.size

    def contains(self, u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return np.all(np.abs(np.atleast_2d(u)) <= self.halfwidths + tol, axis=1)

    def vertices(self) -> np.ndarray:
        if self.dim > MAX_BOX_VERTICES_DIM:
            raise BadParameter(f"box vertex enumeration limited to dim <= {MAX_BOX_VERTICES_DIM}")
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * self.dim, indexing="ij")).reshape(self.dim, -1).T
        return signs * self.halfwidths

    def to_dict(self):
        return {"kind": "box", "halfwidths": self.halfwidths.tolist()}


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of ``vertices`` (rows)."""

    vertices_: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices_, dtype=float))
        if V.shape[0] == 0 or not np.all(np.isfinite(V)):
            raise BadParameter("polytope needs at least one finite vertex")
        V.setflags(write=False)
        object.__setattr__(self, "vertices_", V)

    @property
    def dim(self) -> int:
        return self.vertices_.shape[1]

    def vertices(self) -> np.ndarray:
        return self.vertices_

    def contains(self, u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        U = np.atleast_2d(u)
        out = np.empty(U.shape[0], dtype=bool)
        for i, row in enumerate(U):
            proj, _ = project_hull(self.vertices_, row)
            out[i] = np.linalg.norm(proj - row) <= tol * max(1.0, np.abs(self.vertices_).max())
        return out

    def to_dict(self):
        return {"kind": "polytope", "vertices": self.vertices_.tolist()}


ControlBody = Union[Ball, Box, Polytope]


def sample_body(body: ControlBody, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points of the body (uniform for balls and boxes, Dirichlet mixtures for polytopes)."""
    if isinstance(body, Ball):
        g = rng.normal(size=(n, body.dim))
        g /= np.maximum(row_norms(g), 1e-300)[:, None]
        return g * (body.radius * rng.uniform(size=n) ** (1.0 / body.dim))[:, None]
    if isinstance(body, Box):
        return rng.uniform(-1.0, 1.0, size=(n, body.dim)) * body.halfwidths
    lam = rng.dirichlet(np.ones(body.vertices_.shape[0]), size=n)
    return lam @ body.vertices_


# --- drift library ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ZeroDrift:
    dim: int

    lipschitz = 0.0

    def __call__(self, X):
        return np.zeros_like(X)

    def to_dict(self):
        return {"kind": "zero"}


@dataclass(frozen=True, eq=False)
class ConstantDrift:
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(-1))

    lipschitz = 0.0

    @property
    def dim(self):
        return self.b.size

    def __call__(self, X):
        return np.broadcast_to(self.b, X.shape).copy()

    def to_dict(self):
        return {"kind": "constant", "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class AffineDrift:
    """``b(x) = A x + b``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape != (b.size, b.size):
            raise DimensionMismatch("affine drift needs a square A matching b")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.b.size

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.A, 2))

    def __call__(self, X):
        return X @ self.A.T + self.b

    def to_dict(self):
        return {"kind": "affine", "A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class ClampedAffineDrift(AffineDrift):
    """``A x + b`` with each coordinate clamped to ``[-bound, bound]``."""

    bound: float = 1.0

    def __call__(self, X):
        return np.clip(X @ self.A.T + self.b, -self.bound, self.bound)

    def to_dict(self):
        return {**super().to_dict(), "kind": "clamped_affine", "bound": self.bound}


@dataclass(frozen=True, eq=False)
class SinusoidalDrift:
    """Coordinatewise ``amplitude * sin(frequency * x)``."""

    dim: int
    amplitude: float
    frequency: float

    @property
    def lipschitz(self):
        return abs(self.amplitude * self.frequency)

    def __call__(self, X):
        return self.amplitude * np.sin(self.frequency * X)

    def to_dict(self):
        return {"kind": "sinusoidal", "amplitude": self.amplitude, "frequency": self.frequency}


Drift = Union[ZeroDrift, ConstantDrift, AffineDrift, ClampedAffineDrift, SinusoidalDrift]

KERNELS = {"none": _backend.KERNEL_NONE, "linear": _backend.KERNEL_LINEAR, "bounded_lipschitz": _backend.KERNEL_BOUNDED}
KERNEL_LIPSCHITZ = {"none": 0.0, "linear": 1.0, "bounded_lipschitz": 1.0}


def drift_from_dict(record: dict, dim: int) -> Drift:
    kind = record.get("kind")
    if kind == "zero":
        return ZeroDrift(dim)
    if kind == "constant":
        return ConstantDrift(record["b"])
    if kind == "affine":
        return AffineDrift(record["A"], record["b"])
    if kind == "clamped_affine":
        return ClampedAffineDrift(record["A"], record["b"], float(record["bound"]))
    if kind == "sinusoidal":
        return SinusoidalDrift(dim, float(record["amplitude"]), float(record["frequency"]))
    raise BadParameter(f"unknown drift kind {kind!r}")


def body_from_dict(record: dict) -> ControlBody:
    kind = record.get("kind")
    if kind == "ball":
        return Ball(float(record["radius"]), int(record["ctrl_dim"]))
    if kind == "box":
        return Box(record["halfwidths"])
    if kind == "polytope":
        return Polytope(record["vertices"])
    raise BadParameter(f"unknown body kind {kind!r}")


# --- the set-valued map ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class DynamicsSpec:
    """Parametrized ``F(mu, x)``.

    ``gain`` is either a scalar ``s`` (meaning ``s * I``, requiring the body
    dimension to equal ``dim``) or a ``(dim, m)`` matrix. ``declared_L`` is the
    user's Lipschitz constant; :func:`lipschitz_audit` can falsify it.
    """

    dim: int
    drift: Drift
    kernel: str
    gain_c: float
    body: ControlBody
    declared_L: float
    gain: Union[float, np.ndarray] = 1.0
    gain_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise BadParameter(f"unknown kernel {self.kernel!r}")
        if not self.declared_L > 0:
            raise BadParameter("declared_L must be > 0")
        if getattr(self.drift, "dim", self.dim) != self.dim:
            raise DimensionMismatch("drift dimension differs from spec dim")
        if np.ndim(self.gain) == 0:
            if self.body.dim != self.dim:
                raise DimensionMismatch("scalar gain needs body dim == state dim")
            G = float(self.gain) * np.eye(self.dim)
        else:
            G = np.atleast_2d(np.asarray(self.gain, dtype=float))
            if G.shape != (self.dim, self.body.dim):
                raise DimensionMismatch(f"gain must be {(self.dim, self.body.dim)}, got {G.shape}")
        G.setflags(write=False)
        object.__setattr__(self, "gain_matrix", G)

    @property
    def scalar_gain(self) -> float | None:
        return float(self.gain) if np.ndim(self.gain) == 0 else None

    def lipschitz_bound(self) -> float:
        """Lipschitz constant implied by the library data: ``Lip(b) + |c| Lip(k)``."""
        return float(self.drift.lipschitz) + abs(self.gain_c) * KERNEL_LIPSCHITZ[self.kernel]

    def centers(self, mu: DiscreteMeasure, X: np.ndarray) -> np.ndarray:
        """``a(mu, x)`` for each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim or mu.dim != self.dim:
            raise DimensionMismatch("state dimension mismatch")
        out = self.drift(X)
        if self.kernel != "none" and self.gain_c != 0.0:
            out = out + self.gain_c * _backend.interaction_sum(X, mu.points, mu.weights, KERNELS[self.kernel])
        if not np.all(np.isfinite(out)):
            raise NonFinite("velocity centers are not finite")
        return out

    def to_dict(self) -> dict:
        gain = self.scalar_gain if self.scalar_gain is not None else self.gain_matrix.tolist()
        return {
            "drift": self.drift.to_dict(),
            "kernel": self.kernel,
            "gain_c": self.gain_c,
            "gain": gain,
            "body": self.body.to_dict(),
            "L": self.declared_L,
        }

    def __eq__(self, other):
        return isinstance(other, DynamicsSpec) and self.dim == other.dim and self.to_dict() == other.to_dict()

    __hash__ = object.__hash__


def dynamics_from_dict(record: dict, dim: int) -> DynamicsSpec:
    gain = record.get("gain", 1.0)
    return DynamicsSpec(
        dim=dim,
        drift=drift_from_dict(record["drift"], dim),
        kernel=record["kernel"],
        gain_c=float(record["gain_c"]),
        body=body_from_dict(record["body"]),
        declared_L=float(record["L"]),
        gain=gain if np.ndim(gain) == 0 else np.asarray(gain, dtype=float),
    )


@dataclass(frozen=True, eq=False)
class SetImage:
    """The compact convex set ``center + gain @ body``."""

    center: np.ndarray
    gain: np.ndarray
    body: ControlBody
    scalar_gain: float | None = None

    def point(self, u: np.ndarray) -> np.ndarray:
        return self.center + self.gain @ u


def velocity_set(spec: DynamicsSpec, mu: DiscreteMeasure, x) -> SetImage:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    c = spec.centers(mu, x)[0]
    return SetImage(c, spec.gain_matrix, spec.body, spec.scalar_gain)


# --- support minimization --------------------------------------------------


def _body_argmin(body: ControlBody, G: np.ndarray) -> np.ndarray:
    """Rows: minimizers over the body of ``<g_i, u>``."""
    if isinstance(body, Ball):
        n = row_norms(G)
        U = np.zeros_like(G)
        nz = n > 0
        U[nz] = -body.radius * G[nz] / n[nz, None]
        return U
    if isinstance(body, Box):
        return -np.sign(G) * body.halfwidths
    V = body.vertices_
    return V[np.argmin(G @ V.T, axis=1)]


def support_argmin_batch(centers: np.ndarray, gain: np.ndarray, body: ControlBody, Q: np.ndarray):
    """Vectorized :func:`support_argmin`: returns ``(V, values, U)`` row by row."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    U = _body_argmin(body, Q @ gain)
    V = centers + U @ gain.T
    return V, np.einsum("ij,ij->i", Q, V), U


def support_argmin(img: SetImage, q):
    """Minimizer ``v*`` of ``<q, v>`` over the image, its value and control.

    Ties on polytopes go to the lowest vertex index; ``q = 0`` returns the
    center.
    """
    q = np.asarray(q, dtype=float).reshape(1, -1)
    V, vals, U = support_argmin_batch(img.center.reshape(1, -1), img.gain, img.body, q)
    return V[0], float(vals[0]), U[0]


# --- metric projection -----------------------------------------------------


def project_batch(centers: np.ndarray, spec_or_img, W: np.ndarray):
    """Project each row of ``W`` onto the image with the matching center row.

    Returns ``(dists, projs, controls)``.
    """
    if isinstance(spec_or_img, DynamicsSpec):
        gain, body, s = spec_or_img.gain_matrix, spec_or_img.body, spec_or_img.scalar_gain
    else:
        gain, body, s = spec_or_img.gain, spec_or_img.body, spec_or_img.scalar_gain
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if s is not None and isinstance(body, (Ball, Box)):
        P = np.empty_like(W)
        U = np.empty((W.shape[0], body.dim))
        Z = W - centers
        if isinstance(body, Ball):
            r = abs(s) * body.radius
            n = row_norms(Z)
            fac = np.where(n > r, r / np.where(n > 0, n, 1.0), 1.0)
            D = Z * fac[:, None]
        else:
            D = np.clip(Z, -abs(s) * body.halfwidths, abs(s) * body.halfwidths)
        P[:] = centers + D
        U[:] = D / s if s != 0 else 0.0
        return row_norms(W - P), P, U
    out_d = np.empty(W.shape[0])
    out_p = np.empty_like(W)
    out_u = np.empty((W.shape[0], body.dim))
    for i in range(W.shape[0]):
        img = SetImage(centers[i], gain, body, s)
        out_d[i], out_p[i], out_u[i] = _project_one(img, W[i])
    return out_d, out_p, out_u


def _project_one(img: SetImage, w: np.ndarray):
    if img.scalar_gain is not None and isinstance(img.body, (Ball, Box)):
        d, P, U = project_batch(img.center.reshape(1, -1), img, w.reshape(1, -1))
        return float(d[0]), P[0], U[0]
    z = w - img.center
    if isinstance(img.body, Ball):
        u = project_ellipsoid(img.gain, z, img.body.radius)
    else:
        Vb = img.body.vertices()
        proj, lam = project_hull(Vb @ img.gain.T, z)
        u = lam @ Vb
    proj = img.point(u)
    _certify(img, w, proj)
    return float(np.linalg.norm(w - proj)), proj, u


def _certify(img: SetImage, w: np.ndarray, proj: np.ndarray) -> None:
    """Variational inequality ``<w - proj, z - proj> <= tol`` for all ``z`` in the image."""
    g = w - proj
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return
    # max over the image of <g, z> is minus the support minimum in direction -g
    _, val, _ = support_argmin(img, -g)
    gap = -val - float(g @ proj)
    if gap > CERT_TOL * max(1.0, gn * (1.0 + float(np.linalg.norm(proj)))):
        raise ProjectionNotConverged(f"projection certificate failed (gap {gap:.3e})")


def distance_to_image(img: SetImage, w):
    """``(dist, proj)``: Euclidean distance from ``w`` to the image and the nearest point.

    Scaled-identity gains with ball or box bodies use exact clamps. Other
    cases solve the constrained least-squares problem (ellipsoids) or the
    minimum-norm-point problem over vertex images, then certify the result.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    d, p, _ = _project_one(img, w)
    return d, p


# --- constants and audits --------------------------------------------------


def k_f(spec: DynamicsSpec) -> float:
    """``max |v|`` over ``F(delta_0, 0)``.

    Exact for polytopes, boxes and scaled-identity balls; for a ball under a
    general gain the value ``|a_0| + radius * ||R||`` is an upper bound.
    """
    zero = np.zeros((1, spec.dim))
    a0 = spec.centers(new_measure(zero), zero)[0]
    body = spec.body
    if isinstance(body, Ball):
        return float(np.linalg.norm(a0)) + body.radius * float(np.linalg.norm(spec.gain_matrix, 2))
    pts = a0 + body.vertices() @ spec.gain_matrix.T
    return float(row_norms(pts).max())


def hausdorff(img1: SetImage, img2: SetImage, n_dirs: int | None = None, seed: int = 0) -> float:
    """Hausdorff distance of two images.

    Equal gain and body make the images translates, so the value is exactly
    ``|c1 - c2|``. Otherwise the support functions are compared on ``64 d``
    fixed directions, which gives a lower bound.
    """
    if img1.body is img2.body and np.array_equal(img1.gain, img2.gain):
        return float(np.linalg.norm(img1.center - img2.center))
    d = img1.center.size
    n_dirs = n_dirs or 64 * d
    dirs = derive_rng(seed, "hausdorff_dirs").normal(size=(n_dirs, d))
    dirs /= row_norms(dirs)[:, None]
    _, v1, _ = support_argmin_batch(np.tile(img1.center, (n_dirs, 1)), img1.gain, img1.body, dirs)
    _, v2, _ = support_argmin_batch(np.tile(img2.center, (n_dirs, 1)), img2.gain, img2.body, dirs)
    return float(np.abs(v1 - v2).max())


def lipschitz_audit(spec: DynamicsSpec, p: float, n_samples: int, seed: int = 0, box: float = 2.0) -> dict:
    """Empirical Lipschitz ratio of ``F`` on random pairs from ``[-box, box]^d``.

    Pairs cycle through three kinds: shared measure with moved point, shared
    point with moved measure, and both moved. The ratio is
    ``Hausdorff / (W_p + |dx|)``; a violation is reported when it exceeds
    ``declared_L (1 + 1e-6)``. Only the sampled region is examined.
    """
    if n_samples < 1:
        raise BadParameter("n_samples must be >= 1")
    rng = derive_rng(seed, "lipschitz_audit")
    d = spec.dim
    worst = 0.0
    for k in range(n_samples):
        n1 = int(rng.integers(1, 5))
        mu1 = new_measure(rng.uniform(-box, box, size=(n1, d)))
        x1 = rng.uniform(-box, box, size=d)
        kind = k % 3
        if kind == 0:
            mu2 = mu1
            x2 = x1 + rng.normal(scale=rng.choice([1e-3, 0.1, 1.0]), size=d)
        elif kind == 1:
            mu2 = mu1.translate(rng.normal(scale=0.5, size=d)) if rng.uniform() < 0.5 else new_measure(
                mu1.points + rng.normal(scale=0.3, size=mu1.points.shape))
            x2 = x1
        else:
            mu2 = new_measure(rng.uniform(-box, box, size=(int(rng.integers(1, 5)), d)))
            x2 = rng.uniform(-box, box, size=d)
        denom = wp(mu1, mu2, p) + float(np.linalg.norm(x1 - x2))
        if denom <= 1e-12:
            continue
        h = hausdorff(velocity_set(spec, mu1, x1), velocity_set(spec, mu2, x2))
        worst = max(worst, h / denom)
    return {
        "max_ratio": worst,
        "declared_L": spec.declared_L,
        "violation": worst > spec.declared_L * (1.0 + 1e-6),
        "n_samples": n_samples,
        "p": p,
        "region": f"[-{box}, {box}]^{d} (sampled region only)",
    }
