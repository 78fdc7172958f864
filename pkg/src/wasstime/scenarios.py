"""Built-in scenario records, shipped as ready-to-parse configs."""
from __future__ import annotations

import copy
import math

from .config import ScenarioConfig, parse_config

_BALL_1D = {
    "drift": {"kind": "zero"},
    "kernel": "none",
    "gain_c": 0.0,
    "body": {"kind": "ball", "radius": 1.0, "ctrl_dim": 1},
    "L": 0.5,
}

SCENARIOS: dict[str, tuple[str, dict]] = {
    "HalfLineUnitBall": (
        "Unit-ball velocities on the line, target {x <= 0} through its distance; minimum time is the farthest atom's distance.",
        {
            "name": "HalfLineUnitBall",
            "dim": 1,
            "p": 2.0,
            "seed": 0,
            "measure": {"atoms": [[0.8]]},
            "dynamics": _BALL_1D,
            "target": {"observables": [{"kind": "dist_shifted", "set": {"kind": "halfspace", "normal": [1.0], "offset": 0.0}}]},
            "profile": {"kind": "power_law", "alpha": 0.0, "beta": 2.0, "K": 0.25, "L": 0.5},
            "integration": {"h": 0.001, "T_max": 2.0, "max_iters": 1000},
        },
    ),
    "Contraction": (
        "Linear contraction with mean-field attraction and a ball of controls in the plane; target is the disc of radius 1/2.",
        {
            "name": "Contraction",
            "dim": 2,
            "p": 2.0,
            "n": 32,
            "seed": 7,
            "measure": {"density": {"kind": "gaussian_truncated", "mean": [1.5, 0.0], "std": 0.3, "radius": 0.6}},
            "dynamics": {
                "drift": {"kind": "affine", "A": [[-0.2, 0.0], [0.0, -0.2]], "b": [0.0, 0.0]},
                "kernel": "linear",
                "gain_c": -0.1,
                "body": {"kind": "ball", "radius": 1.0, "ctrl_dim": 2},
                "L": 0.3,
            },
            "target": {"observables": [{"kind": "dist_shifted", "set": {"kind": "ball", "center": [0.0, 0.0], "radius": 0.5}}]},
            "profile": {"kind": "power_law", "alpha": 0.0, "beta": 2.0, "K": 0.2, "L": 0.3},
            "integration": {"h": 0.001, "T_max": 3.0, "max_iters": 1000},
        },
    ),
    "ExNontrivialBump": (
        "Uniform law on [-1/2, 1/2] against translated bumps with eps = 1/12; a target without a classical counterpart.",
        {
            "name": "ExNontrivialBump",
            "dim": 1,
            "p": 2.0,
            "n": 2000,
            "seed": 0,
            "measure": {"density": {"kind": "equispaced", "a": -0.5, "b": 0.5}},
            "dynamics": _BALL_1D,
            "target": {"observables": [{"kind": "bump_grid", "eps": 1.0 / 12.0, "y_min": -2.0, "y_max": 2.0, "n": 401}]},
            "integration": {"h": 0.001, "T_max": 1.0, "max_iters": 100},
        },
    ),
    "PQ12Example": (
        "Two-atom measure lambda delta_(1,0) + (1 - lambda) delta_(0, 2^(1/p)) at lambda = 1/2, target {0}.",
        {
            "name": "PQ12Example",
            "dim": 2,
            "p": 2.0,
            "seed": 0,
            "measure": {"atoms": [[1.0, 0.0], [0.0, math.sqrt(2.0)]], "weights": [0.5, 0.5]},
            "dynamics": {
                "drift": {"kind": "zero"},
                "kernel": "none",
                "gain_c": 0.0,
                "body": {"kind": "ball", "radius": 1.0, "ctrl_dim": 2},
                "L": 0.5,
            },
            "target": {"observables": [{"kind": "dist_shifted", "set": {"kind": "ball", "center": [0.0, 0.0], "radius": 0.0}}]},
            "profile": {"kind": "power_law", "alpha": 0.0, "beta": 2.0, "K": 0.25, "L": 0.5},
            "integration": {"h": 0.001, "T_max": 2.0, "max_iters": 1000},
        },
    ),
}


def scenario_names() -> list[str]:
    return list(SCENARIOS)


def scenario_record(name: str) -> dict:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; choose from {scenario_names()}")
    return copy.deepcopy(SCENARIOS[name][1])


def load_scenario(name: str) -> ScenarioConfig:
    return parse_config(scenario_record(name))
