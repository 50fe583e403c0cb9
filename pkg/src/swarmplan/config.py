"""JSON configuration: defaults, loading, and mapping onto planner objects.

The shipped defaults reproduce the reference simulation tuning, so a bare
`compare` run exercises the standard benchmark setup at desk scale.
"""

import copy
import json

import numpy as np

from .collision import EllipsoidSpec
from .planner import PlannerConfig

DEFAULT_CONFIG = {
    "model": {
        "omega_n": 8.0,
        "damping": 0.7,
    },
    "planner": {
        "h": 0.2,
        "ts": 0.05,
        "horizon": 16,
        "segments": 3,
        "degree": 5,
        "kappa": 3,
        "goal_weight": 100.0,
        "energy_weights": {"2": 0.008},
        "slack_quad": 1.0,
        "slack_lin": -5.0e4,
        "deriv_limits": {"2": 1.0},
        "r_min": 0.3,
        "theta": [1.0, 1.0, 2.0],
        "f_min": -0.01,
        "f_max": 0.8,
        "eps_act": 0.01,
        "cont_order": 2,
        "goal_tol": 0.10,
        "method": "ondemand-input",
    },
    "scenario": {
        "workspace": [[-1.5, -1.5, 0.0], [1.5, 1.5, 2.0]],
        "duration_limit": 20.0,
        "margin": 0.15,
    },
    "noise": {
        "sigma_p": 0.005,
        "sigma_v": 0.02,
    },
    "collision_check": {
        "r_coll": 0.2,
        "theta": [1.0, 1.0, 2.25],
    },
    "benchmark": {
        "methods": ["bvc", "bvc-soft", "ondemand-state", "ondemand-input"],
        "counts": [10, 20, 30],
        "trials": 20,
        "base_seed": 2020,
    },
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None):
    """Default configuration, deep-merged with an optional JSON file."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            cfg = _merge(cfg, json.load(fh))
    return cfg


def dump_config(cfg, path=None):
    text = json.dumps(cfg, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def planner_config(cfg, method=None):
    """Build a PlannerConfig from a configuration dictionary."""
    p = cfg["planner"]
    m = cfg["model"]
    return PlannerConfig(
        omega_n=float(m["omega_n"]), damping=float(m["damping"]),
        h=float(p["h"]), ts=float(p["ts"]), horizon=int(p["horizon"]),
        segments=int(p["segments"]), degree=int(p["degree"]),
        kappa=int(p["kappa"]), goal_weight=float(p["goal_weight"]),
        energy_weights={int(k): float(v) for k, v in p["energy_weights"].items()},
        slack_quad=float(p["slack_quad"]), slack_lin=float(p["slack_lin"]),
        deriv_limits={int(k): v for k, v in p["deriv_limits"].items()},
        ellipsoid=EllipsoidSpec(p["theta"], float(p["r_min"])),
        f_min=float(p["f_min"]), f_max=float(p["f_max"]),
        eps_act=float(p["eps_act"]), method=method or p["method"],
        workspace=np.asarray(cfg["scenario"]["workspace"], dtype=float),
        cont_order=int(p["cont_order"]), goal_tol=float(p["goal_tol"]))


def collision_spec(cfg):
    c = cfg["collision_check"]
    return EllipsoidSpec(c["theta"], float(c["r_coll"]))
