"""Hamiltonian evaluation, the Petrov sign condition and oracle viscosity probes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicsSpec, support_argmin_batch
from .errors import BadOrder, DimensionMismatch, MemberMeasure, NonFinite, UnsupportedOracle
from .measures import DiscreteMeasure
from .mintime import HalfLineUnitBall
from .targets import TargetSpec, sigma


@dataclass(frozen=True, eq=False)
class CovectorField:
    """Per-atom covectors ``q(x_i)``, aligned with a measure of order ``p``."""

    values: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.values, dtype=float)).copy()
        if not np.all(np.isfinite(q)):
            raise NonFinite("covector values must be finite")
        if not 1.0 < self.p < math.inf:
            raise BadOrder("covectors need 1 < p < inf")
        q.setflags(write=False)
        object.__setattr__(self, "values", q)

    @property
    def order_dual(self) -> float:
        return self.p / (self.p - 1.0)


def _as_field(q, p: float) -> CovectorField:
    return q if isinstance(q, CovectorField) else CovectorField(q, p)


def min_pairing(spec: DynamicsSpec, mu: DiscreteMeasure, q) -> float:
    """``inf`` over admissible selections ``v`` of ``sum_i w_i <q_i, v_i>``.

    On discrete data the infimum splits into atomwise minima over ``F(mu, x_i)``.
    """
    Q = q.values if isinstance(q, CovectorField) else np.atleast_2d(np.asarray(q, dtype=float))
    if Q.shape != mu.points.shape:
        raise DimensionMismatch(f"covector shape {Q.shape} does not match atoms {mu.points.shape}")
    centers = spec.centers(mu, mu.points)
    _, vals, _ = support_argmin_batch(centers, spec.gain_matrix, spec.body, Q)
    return math.fsum(mu.weights * vals)


def hamiltonian(spec: DynamicsSpec, mu: DiscreteMeasure, q, p: float = 2.0) -> float:
    """``H(mu, q) = -1 - inf_v <q, v>``."""
    field = _as_field(q, p)
    return -1.0 - min_pairing(spec, mu, field)


def petrov_check(spec: DynamicsSpec, target: TargetSpec, mu: DiscreteMeasure) -> tuple[float, bool]:
    """Minimized pairing with the argmax-observable subgradient field.

    ``strict`` is true when the value is below ``-1e-9``.
    """
    sig, j = sigma(target, mu)
    if sig <= target.tol_member:
        raise MemberMeasure("petrov_check needs a measure outside the target")
    xi = target.observables[j].subgrad(mu.points)
    value = min_pairing(spec, mu, xi)
    return value, value < -1e-9


def supersolution_probe(oracle, mu: DiscreteMeasure, q=None, tol: float = 1e-6) -> bool | None:
    """Check ``H(mu, q) >= -tol`` for the analytic gradient of the oracle's minimum time.

    By default ``q`` is ``e_1`` at the farthest atom and ``0`` elsewhere. Returns
    ``None`` (skipped) for members and for states with more than one atom.
    """
    if not isinstance(oracle, HalfLineUnitBall):
        raise UnsupportedOracle(f"{type(oracle).__name__} has no analytic gradient")
    if oracle.exact_time(mu) <= 0.0 or mu.n != 1:
        return None
    if q is None:
        d = oracle.set.distance(mu.points)
        Q = np.zeros_like(mu.points)
        Q[int(np.argmax(d)), 0] = 1.0
        q = CovectorField(Q, oracle.p)
    return hamiltonian(oracle.spec, mu, q, oracle.p) >= -tol
