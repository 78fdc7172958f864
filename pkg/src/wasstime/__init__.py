"""Particle toolkit for controlled nonlocal continuity equations in Wasserstein space."""
from ._backend import BACKEND
from .dynamics import (
    AffineDrift,
    Ball,
    Box,
    ClampedAffineDrift,
    ConstantDrift,
    DynamicsSpec,
    Polytope,
    SinusoidalDrift,
    ZeroDrift,
    distance_to_image,
    k_f,
    lipschitz_audit,
    support_argmin,
    velocity_set,
)
from .errors import WasstimeError
from .hjb import CovectorField, hamiltonian, petrov_check, supersolution_probe
from .measures import DiscreteMeasure, dirac, moment_p, new_measure, sample_density
from .mintime import (
    CustomProfile,
    GreedyReport,
    HalfLineUnitBall,
    PowerLaw,
    budget_audit,
    closed_form_bound,
    dpp_audit,
    greedy_descent,
    pre_example_certificate,
    stla_probe,
    time_bound,
)
from .targets import TargetSpec, classical_counterpart, generalized_distance, is_member, sigma
from .trajectories import Trajectory, filippov_track, integrate, moment_audit
from .transport import GeodesicSpec, TransportPlan, wp, wp_distance

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
