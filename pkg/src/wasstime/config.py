"""Strict JSON scenario configuration.

Every section is checked against a fixed key table; errors name the offending
field path (``dynamics.body.radius: ...``). :meth:`ScenarioConfig.to_dict`
writes a normalized record that parses back to an equal config.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ._util import dumps
from .dynamics import DynamicsSpec, dynamics_from_dict
from .errors import ConfigError
from .measures import DiscreteMeasure, density_from_dict, new_measure, sample_density
from .mintime import PowerLaw, profile_from_dict
from .targets import TargetSpec, sigma, target_from_dict
from .trajectories import ConstantPolicy, Policy, SteepestDescent

TOP_KEYS = {"name": False, "dim": True, "p": True, "n": False, "seed": True, "measure": True,
            "dynamics": True, "target": True, "profile": False, "integration": True, "policy": False}

DRIFT_KEYS = {
    "zero": set(),
    "constant": {"b"},
    "affine": {"A", "b"},
    "clamped_affine": {"A", "b", "bound"},
    "sinusoidal": {"amplitude", "frequency"},
}
BODY_KEYS = {"ball": {"radius", "ctrl_dim"}, "box": {"halfwidths"}, "polytope": {"vertices"}}
SET_KEYS = {
    "halfspace": {"normal", "offset"},
    "ball": {"center", "radius"},
    "box": {"lo", "hi"},
    "polytope": {"A", "b"},
}
OBS_KEYS = {
    "affine": ({"a"}, {"b", "C_phi"}),
    "dist_shifted": ({"set"}, {"alpha", "convex", "C_phi"}),
    "bump": ({"y", "eps"}, {"C_phi"}),
    "bump_grid": ({"eps", "y_min", "y_max", "n"}, {"C_phi"}),
    "quad_cap": ({"c", "r"}, {"M", "C_phi"}),
}
DENSITY_KEYS = {
    "uniform_interval": {"a", "b"},
    "equispaced": {"a", "b"},
    "uniform_box": {"lo", "hi"},
    "gaussian_truncated": {"mean", "std", "radius"},
}
POLICY_KEYS = {"steepest": (set(), {"scale"}), "constant": {"u"}, "zero": set()}


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _require_dict(v, path):
    if not isinstance(v, dict):
        _fail(path, f"expected an object, got {type(v).__name__}")
    return v


def _check_keys(rec: dict, required: set, optional: set, path: str):
    for k in rec:
        if k not in required and k not in optional:
            _fail(f"{path}.{k}" if path else k, "unknown key")
    for k in sorted(required):
        if k not in rec:
            _fail(f"{path}.{k}" if path else k, "missing required key")


def _kinded(rec, table: dict, path: str, extra_optional=frozenset()):
    rec = _require_dict(rec, path)
    kind = rec.get("kind")
    if kind not in table:
        _fail(f"{path}.kind", f"expected one of {sorted(table)}, got {kind!r}")
    spec = table[kind]
    required, optional = spec if isinstance(spec, tuple) else (spec, set())
    _check_keys(rec, required | {"kind"}, set(optional) | set(extra_optional), path)
    return kind


def _number(v, path, lo=-math.inf, strict_lo=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(path, f"expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        _fail(path, f"expected an integer, got {v!r}")
    if (strict_lo and not v > lo) or (not strict_lo and not v >= lo):
        _fail(path, f"must be {'>' if strict_lo else '>='} {lo}, got {v!r}")
    return int(v) if integer else float(v)


def _build(path, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        _fail(path, str(exc))


def _validate_target(rec, path):
    rec = _require_dict(rec, path)
    _check_keys(rec, {"observables"}, {"tol_member"}, path)
    obs = rec["observables"]
    if not isinstance(obs, list) or not obs:
        _fail(f"{path}.observables", "expected a non-empty list")
    for i, o in enumerate(obs):
        kind = _kinded(o, OBS_KEYS, f"{path}.observables[{i}]")
        if kind == "dist_shifted":
            _kinded(o["set"], SET_KEYS, f"{path}.observables[{i}].set")


@dataclass(eq=False)
class ScenarioConfig:
    """Parsed scenario: the raw normalized record plus the built objects."""

    record: dict
    dim: int
    p: float
    seed: int
    measure: DiscreteMeasure
    dynamics: DynamicsSpec
    target: TargetSpec
    profile: PowerLaw | None
    h: float
    T_max: float
    max_iters: int
    policy: Policy

    @property
    def name(self) -> str:
        return self.record.get("name", "")

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.record))

    def to_json(self) -> str:
        return dumps(self.record)

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.to_json() == other.to_json()

    __hash__ = object.__hash__


def parse_config(data: dict | str) -> ScenarioConfig:
    """Validate and build a scenario; raises :class:`ConfigError` with a field path."""
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"<root>: invalid JSON ({exc})") from None
    rec = _require_dict(data, "<root>")
    _check_keys(rec, {k for k, req in TOP_KEYS.items() if req}, {k for k, req in TOP_KEYS.items() if not req}, "")

    dim = _number(rec["dim"], "dim", 1, integer=True)
    p = _number(rec["p"], "p", 1.0)
    seed = _number(rec["seed"], "seed", 0, integer=True)
    out: dict[str, Any] = {}
    if "name" in rec:
        if not isinstance(rec["name"], str):
            _fail("name", "expected a string")
        out["name"] = rec["name"]
    out.update(dim=dim, p=p, seed=seed)

    m = _require_dict(rec["measure"], "measure")
    if "density" in m:
        _check_keys(m, {"density"}, set(), "measure")
        if "n" not in rec:
            _fail("n", "required when the measure is a density")
        n = _number(rec["n"], "n", 1, integer=True)
        _kinded(m["density"], DENSITY_KEYS, "measure.density")
        density = _build("measure.density", density_from_dict, m["density"])
        mu = _build("measure.density", sample_density, density, n, seed)
        out["n"] = n
    else:
        _check_keys(m, {"atoms"}, {"weights"}, "measure")
        mu = _build("measure", new_measure, np.asarray(m["atoms"], dtype=float), m.get("weights"))
        if "n" in rec and _number(rec["n"], "n", 1, integer=True) != mu.n:
            _fail("n", f"inline measure has {mu.n} atoms")
    if mu.dim != dim:
        _fail("measure", f"atoms have dimension {mu.dim}, expected {dim}")
    out["measure"] = m

    d = _require_dict(rec["dynamics"], "dynamics")
    _check_keys(d, {"drift", "kernel", "gain_c", "body", "L"}, {"gain"}, "dynamics")
    _kinded(d["drift"], DRIFT_KEYS, "dynamics.drift")
    _kinded(d["body"], BODY_KEYS, "dynamics.body")
    if d["kernel"] not in ("none", "linear", "bounded_lipschitz"):
        _fail("dynamics.kernel", f"unknown kernel {d['kernel']!r}")
    _number(d["gain_c"], "dynamics.gain_c")
    _number(d["L"], "dynamics.L", 0.0, strict_lo=True)
    dynamics = _build("dynamics", dynamics_from_dict, d, dim)
    out["dynamics"] = d

    _validate_target(rec["target"], "target")
    target = _build("target", target_from_dict, dict(rec["target"], p=p))
    out["target"] = rec["target"]

    profile = None
    if "profile" in rec:
        _kinded(rec["profile"], {"power_law": {"alpha", "beta", "K", "L"}}, "profile")
        profile = _build("profile", profile_from_dict, rec["profile"])
        out["profile"] = rec["profile"]

    integ = _require_dict(rec["integration"], "integration")
    _check_keys(integ, {"h", "T_max", "max_iters"}, set(), "integration")
    h = _number(integ["h"], "integration.h", 0.0, strict_lo=True)
    T_max = _number(integ["T_max"], "integration.T_max", 0.0, strict_lo=True)
    max_iters = _number(integ["max_iters"], "integration.max_iters", 1, integer=True)
    out["integration"] = integ

    policy: Policy
    if "policy" in rec:
        kind = _kinded(rec["policy"], POLICY_KEYS, "policy")
        out["policy"] = rec["policy"]
    else:
        kind = "steepest"
    if kind == "steepest":
        scale = _number(rec.get("policy", {}).get("scale", 1.0), "policy.scale", 0.0)
        policy = _TargetSteepest(target, scale)
    elif kind == "constant":
        u = np.asarray(rec["policy"]["u"], dtype=float).reshape(-1)
        if u.size != dynamics.body.dim or not np.all(dynamics.body.contains(u)):
            _fail("policy.u", "control must lie in the body")
        policy = ConstantPolicy(u)
    else:
        if not np.all(dynamics.body.contains(np.zeros(dynamics.body.dim))):
            _fail("policy", "the zero control is outside the body")
        policy = ConstantPolicy(np.zeros(dynamics.body.dim))

    return ScenarioConfig(json.loads(json.dumps(out)), dim, p, seed, mu, dynamics, target, profile,
                          h, T_max, max_iters, policy)


class _TargetSteepest(SteepestDescent):
    """Steepest descent on whichever observable currently attains ``sigma``."""

    def __init__(self, target: TargetSpec, scale: float):
        super().__init__(field=None, scale=scale)
        self.target = target

    def controls(self, spec, mu, X, centers, k, t):
        _, j = sigma(self.target, mu)
        self.field = self.target.observables[j].subgrad
        return super().controls(spec, mu, X, centers, k, t)


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path} ({exc.strerror})") from None
    return parse_config(text)
