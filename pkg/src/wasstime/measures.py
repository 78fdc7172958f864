"""Discrete probability measures on R^d.

A :class:`DiscreteMeasure` is a finite convex combination of Dirac masses.
Everything downstream (transport, particle dynamics, targets) works on this
representation.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._util import derive_rng, row_norms
from .errors import BadInterval, BadOrder, BadSum, EmptyMeasure, NegativeWeight, NonFinite

WEIGHT_CLAMP_TOL = 1e-14
SUM_TOL = 1e-9
EQUAL_WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted particle ensemble ``sum_i w_i delta_{x_i}``.

    Build instances with :func:`new_measure`; the constructor assumes its
    inputs are already validated. Arrays are stored read-only.
    """

    points: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.n

    def is_equal_weight(self, tol: float = EQUAL_WEIGHT_TOL) -> bool:
        return float(np.max(np.abs(self.weights - 1.0 / self.n))) < tol

    def same_atoms(self, other: "DiscreteMeasure", tol: float = 0.0) -> bool:
        """Atom-by-atom comparison (order matters)."""
        if self.points.shape != other.points.shape:
            return False
        return bool(
            np.all(np.abs(self.points - other.points) <= tol)
            and np.all(np.abs(self.weights - other.weights) <= tol)
        )

    def translate(self, shift) -> "DiscreteMeasure":
        shift = np.asarray(shift, dtype=float).reshape(1, -1)
        return _trusted(self.points + shift, self.weights)

    def coalesce(self, tol: float) -> "DiscreteMeasure":
        """Merge atoms closer than ``tol`` (greedy, in index order), summing weights."""
        pts, wts = [], []
        used = np.zeros(self.n, dtype=bool)
        for i in range(self.n):
            if used[i]:
                continue
            close = (~used) & (row_norms(self.points - self.points[i]) <= tol)
            used |= close
            pts.append(self.points[i])
            wts.append(math.fsum(self.weights[close]))
        return new_measure(np.array(pts), np.array(wts))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "points": self.points.tolist(), "weights": self.weights.tolist()}

    def to_json(self) -> str:
        from ._util import dumps

        return dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x_{k + 1}" for k in range(self.dim)] + ["w"])
        for x, w in zip(self.points, self.weights):
            writer.writerow([format(v, ".17g") for v in x] + [format(w, ".17g")])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, record: dict) -> "DiscreteMeasure":
        unknown = set(record) - {"dim", "points", "weights"}
        if unknown:
            raise ValueError(f"unknown measure keys: {sorted(unknown)}")
        pts = np.asarray(record["points"], dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if "dim" in record and pts.size and pts.shape[1] != int(record["dim"]):
            raise ValueError(f"dim={record['dim']} but points have {pts.shape[1]} coordinates")
        return new_measure(pts, record.get("weights"))

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        return cls.from_dict(json.loads(text))


def _trusted(points: np.ndarray, weights: np.ndarray) -> DiscreteMeasure:
    points = np.array(points, dtype=float)
    weights = np.array(weights, dtype=float)
    points.setflags(write=False)
    weights.setflags(write=False)
    return DiscreteMeasure(points, weights)


def new_measure(points, weights=None) -> DiscreteMeasure:
    """Validate and normalize a weighted point cloud.

    Parameters
    ----------
    points : array_like, shape (n, d) or (n,)
        Atom locations; a 1-D array is read as ``n`` points in R^1.
    weights : array_like, shape (n,), optional
        Probability masses. Defaults to equal weights. Negatives down to
        ``-1e-14`` are clamped to zero; the sum must lie within ``1e-9`` of 1
        and is then renormalized.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise EmptyMeasure("a measure needs at least one atom")
    n = pts.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != n:
            raise ValueError(f"{n} points but {w.shape[0]} weights")
    if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
        raise NonFinite("points and weights must be finite")
    if np.any(w < -WEIGHT_CLAMP_TOL):
        raise NegativeWeight(f"negative weight {float(w.min())!r}")
    w = np.where(w < 0.0, 0.0, w)
    total = math.fsum(w)
    if abs(total - 1.0) > SUM_TOL:
        raise BadSum(f"weights sum to {total!r}, expected 1")
    if weights is not None:
        w = w / total
    return _trusted(pts, w)


def dirac(x) -> DiscreteMeasure:
    return new_measure(np.asarray(x, dtype=float).reshape(1, -1), [1.0])


def moment_p(mu: DiscreteMeasure, p: float) -> float:
    """``(sum_i w_i |x_i|^p)^(1/p)``, the p-th root of the p-moment."""
    if p < 1:
        raise BadOrder(f"moment order must be >= 1, got {p}")
    return math.fsum(mu.weights * row_norms(mu.points) ** p) ** (1.0 / p)


def push_forward(mu: DiscreteMeasure, f: Callable, vectorized: bool = False) -> DiscreteMeasure:
    """Image measure ``f # mu``; atoms are mapped one by one and never merged.

    With ``vectorized=True``, ``f`` receives the whole ``(n, d)`` array.
    """
    if vectorized:
        out = np.asarray(f(mu.points), dtype=float)
    else:
        out = np.array([np.atleast_1d(np.asarray(f(x), dtype=float)) for x in mu.points])
    if out.ndim == 1:
        out = out.reshape(mu.n, -1)
    if not np.all(np.isfinite(out)):
        raise NonFinite("push-forward map produced non-finite values")
    return _trusted(out, mu.weights)


def mixture(mu: DiscreteMeasure, nu: DiscreteMeasure, s: float) -> DiscreteMeasure:
    """Linear mixture ``(1-s) mu + s nu`` as an ``n+m`` atom measure."""
    pts = np.vstack([mu.points, nu.points])
    w = np.concatenate([(1.0 - s) * mu.weights, s * nu.weights])
    return new_measure(pts, w)


# --- samplers --------------------------------------------------------------


@dataclass(frozen=True)
class UniformInterval:
    a: float
    b: float


@dataclass(frozen=True)
class Equispaced:
    a: float
    b: float


@dataclass(frozen=True)
class UniformBox:
    lo: Sequence[float]
    hi: Sequence[float]


@dataclass(frozen=True)
class GaussianTruncated:
    mean: Sequence[float]
    std: float
    radius: float


DensitySpec = UniformInterval | Equispaced | UniformBox | GaussianTruncated


def sample_density(spec: DensitySpec, n: int, seed: int = 0) -> DiscreteMeasure:
    """Draw ``n`` equal-weight atoms from one of the compactly supported densities.

    ``Equispaced`` is the deterministic midpoint rule on ``[a, b]``; the other
    specs use a generator derived from ``seed``.
    """
    if n < 1:
        raise EmptyMeasure("n must be positive")
    rng = derive_rng(seed, "sample_density", type(spec).__name__)
    if isinstance(spec, (UniformInterval, Equispaced)):
        if not spec.b > spec.a:
            raise BadInterval(f"need b > a, got [{spec.a}, {spec.b}]")
        if isinstance(spec, Equispaced):
            step = (spec.b - spec.a) / n
            pts = spec.a + step * (np.arange(n) + 0.5)
        else:
            pts = rng.uniform(spec.a, spec.b, size=n)
        return new_measure(pts.reshape(-1, 1))
    if isinstance(spec, UniformBox):
        lo = np.asarray(spec.lo, dtype=float)
        hi = np.asarray(spec.hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise BadInterval("box needs hi > lo in every coordinate")
        return new_measure(rng.uniform(lo, hi, size=(n, lo.size)))
    if isinstance(spec, GaussianTruncated):
        mean = np.asarray(spec.mean, dtype=float).reshape(-1)
        if spec.std <= 0 or spec.radius <= 0:
            raise BadInterval("std and radius must be positive")
        out = np.empty((0, mean.size))
        while out.shape[0] < n:
            draw = rng.normal(0.0, spec.std, size=(2 * n, mean.size))
            out = np.vstack([out, draw[row_norms(draw) <= spec.radius]])
        return new_measure(mean + out[:n])
    raise TypeError(f"unsupported density spec {spec!r}")


def density_from_dict(record: dict) -> DensitySpec:
    kind = record.get("kind")
    fields = {k: v for k, v in record.items() if k != "kind"}
    table = {
        "uniform_interval": UniformInterval,
        "equispaced": Equispaced,
        "uniform_box": UniformBox,
        "gaussian_truncated": GaussianTruncated,
    }
    if kind not in table:
        raise ValueError(f"unknown density kind {kind!r}")
    return table[kind](**fields)


def density_to_dict(spec: DensitySpec) -> dict:
    names = {
        UniformInterval: "uniform_interval",
        Equispaced: "equispaced",
        UniformBox: "uniform_box",
        GaussianTruncated: "gaussian_truncated",
    }
    out = {"kind": names[type(spec)]}
    for k, v in spec.__dict__.items():
        out[k] = list(v) if isinstance(v, (list, tuple, np.ndarray)) else v
    return out
