"""Run configuration: defaults, strict validation, scenario assembly.

Configs are JSON files. Unknown keys are rejected so typos fail loudly;
keys omitted by the user keep their default values. Poses are given as a
position plus an axis-angle rotation vector. Profile indices are 0-based.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, MissingArtifactError
from .geometry import Pose
from .gpmodel import N_DIM
from .motion import (PositionTrigger, SwitchSchedule, TabulatedProfile,
                     TimeTrigger, VanDerPolProfile)
from .pursuit import BoundParameters, ControllerGains
from .simulate import Scenario
from .vision import FeatureModel

_DEFAULT = {
    "dt": 0.02,
    "duration": 20.0,
    "seed": 0,
    "case": "switched",
    "on_violation": "continue",
    "pixel_noise": 0.0,
    "poses": {
        "target": {"position": [-2.0, 0.0, 0.0], "axis_angle": [0.0, 0.0, 0.0]},
        "camera": {"position": [-2.0, -3.0, 0.0], "axis_angle": [0.0, 0.0, 0.0]},
        "observer": {"position": [0.0, 1.0, 0.0], "axis_angle": [0.0, 0.0, 0.0]},
        "desired": {"position": [0.0, 2.0, 0.0], "axis_angle": [0.0, 0.0, 0.0]},
    },
    "gains": {"kc": 10.0, "ke": 17.0},
    "features": {
        "points": [[0.0, 0.0, 0.1], [0.1, 0.0, -0.1],
                   [-0.1, 0.1, -0.1], [-0.1, -0.1, -0.1]],
        "focal_length": 1.0,
    },
    "profiles": [
        {"type": "vanderpol", "eta": 0.5, "v": 1.0},
        {"type": "vanderpol", "eta": 1.5, "v": 0.5},
    ],
    "initial_profile": 0,
    "triggers": [
        {"type": "position", "point": [2.0, 0.0, 0.0], "tol": 0.05},
        {"type": "position", "point": [-2.0, 0.0, 0.0], "tol": 0.05},
    ],
    "switching": {"threshold": 0.05, "alpha_bar": [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]},
    "training": {
        "points_per_profile": 30,
        "noise_std": 0.01,
        "fit_noise": False,
        "restarts": 8,
        "start": {"position": [-2.0, 0.0, 0.0], "axis_angle": [0.0, 0.0, 0.0]},
    },
    "bound": {
        "mode": "axis_known",
        "delta": 0.05,
        "lambda_k": 10.0,
        "lipschitz_pos": 8.0,
        "lipschitz_rot": 0.0,
        "rho_bar": None,
    },
}


def default_config() -> dict:
    return copy.deepcopy(_DEFAULT)


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _require_number(value, path, positive=False, nonnegative=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if positive and value <= 0:
        _fail(path, f"must be positive, got {value}")
    if nonnegative and value < 0:
        _fail(path, f"must be non-negative, got {value}")
    return float(value)


def _require_vector(value, path, length):
    if (not isinstance(value, (list, tuple)) or len(value) != length
            or any(isinstance(v, bool) or not isinstance(v, (int, float))
                   for v in value)):
        _fail(path, f"expected {length} numbers")
    return [float(v) for v in value]


def _require_keys(value, path, known):
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    for key in value:
        if key not in known:
            _fail(path, f"unknown key {key!r}")


def _check_pose(value, path):
    _require_keys(value, path, {"position", "axis_angle"})
    _require_vector(value.get("position", [0, 0, 0]), f"{path}.position", 3)
    _require_vector(value.get("axis_angle", [0, 0, 0]), f"{path}.axis_angle", 3)


def _merge(base: dict, override: dict, path: str = "config") -> dict:
    out = copy.deepcopy(base)
    if not isinstance(override, dict):
        _fail(path, "expected an object")
    for key, value in override.items():
        if key not in base:
            _fail(path, f"unknown key {key!r}")
        if isinstance(base[key], dict) and not isinstance(value, list):
            out[key] = _merge(base[key], value, f"{path}.{key}")
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate_config(cfg: dict) -> dict:
    """Check types, ranges and key names; returns the config unchanged."""
    _require_keys(cfg, "config", set(_DEFAULT))
    _require_number(cfg["dt"], "dt", positive=True)
    _require_number(cfg["duration"], "duration", positive=True)
    if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int):
        _fail("seed", "expected an integer")
    if cfg["case"] not in ("switched", "single"):
        _fail("case", f"expected 'switched' or 'single', got {cfg['case']!r}")
    if cfg["on_violation"] not in ("continue", "abort"):
        _fail("on_violation", "expected 'continue' or 'abort'")
    _require_number(cfg["pixel_noise"], "pixel_noise", nonnegative=True)

    _require_keys(cfg["poses"], "poses", {"target", "camera", "observer", "desired"})
    for name in ("target", "camera", "observer", "desired"):
        _check_pose(cfg["poses"][name], f"poses.{name}")

    _require_keys(cfg["gains"], "gains", {"kc", "ke"})
    for name in ("kc", "ke"):
        v = cfg["gains"][name]
        if isinstance(v, (list, tuple)):
            vals = _require_vector(v, f"gains.{name}", N_DIM)
            if any(x <= 0 for x in vals):
                _fail(f"gains.{name}", "entries must be positive")
        else:
            _require_number(v, f"gains.{name}", positive=True)

    _require_keys(cfg["features"], "features", {"points", "focal_length"})
    pts = cfg["features"]["points"]
    if not isinstance(pts, list) or len(pts) < 4:
        _fail("features.points", "need at least 4 points")
    for i, p in enumerate(pts):
        _require_vector(p, f"features.points[{i}]", 3)
    _require_number(cfg["features"]["focal_length"], "features.focal_length",
                    positive=True)

    if not isinstance(cfg["profiles"], list) or not cfg["profiles"]:
        _fail("profiles", "need at least one profile")
    for i, prof in enumerate(cfg["profiles"]):
        path = f"profiles[{i}]"
        if not isinstance(prof, dict) or "type" not in prof:
            _fail(path, "expected an object with a 'type' key")
        if prof["type"] == "vanderpol":
            _require_keys(prof, path, {"type", "eta", "v"})
            _require_number(prof.get("eta", 0), f"{path}.eta", nonnegative=True)
            _require_number(prof.get("v", 1), f"{path}.v", positive=True)
        elif prof["type"] == "tabulated":
            _require_keys(prof, path, {"type", "path"})
            if not isinstance(prof.get("path"), str):
                _fail(f"{path}.path", "expected a file path string")
        else:
            _fail(f"{path}.type", f"unknown profile type {prof['type']!r}")

    n_prof = len(cfg["profiles"])
    init = cfg["initial_profile"]
    if isinstance(init, bool) or not isinstance(init, int) or not 0 <= init < n_prof:
        _fail("initial_profile", f"expected an index in [0, {n_prof})")

    if not isinstance(cfg["triggers"], list):
        _fail("triggers", "expected a list")
    for i, trig in enumerate(cfg["triggers"]):
        path = f"triggers[{i}]"
        if not isinstance(trig, dict) or "type" not in trig:
            _fail(path, "expected an object with a 'type' key")
        if trig["type"] == "position":
            _require_keys(trig, path, {"type", "point", "tol", "rearm", "to"})
            _require_vector(trig.get("point", [0, 0, 0]), f"{path}.point", 3)
            _require_number(trig.get("tol", 0.05), f"{path}.tol", positive=True)
            if "rearm" in trig:
                _require_number(trig["rearm"], f"{path}.rearm", positive=True)
        elif trig["type"] == "time":
            _require_keys(trig, path, {"type", "at", "to"})
            _require_number(trig.get("at", 0.0), f"{path}.at", nonnegative=True)
        else:
            _fail(f"{path}.type", f"unknown trigger type {trig['type']!r}")
        if "to" in trig and trig["to"] is not None:
            to = trig["to"]
            if isinstance(to, bool) or not isinstance(to, int) or not 0 <= to < n_prof:
                _fail(f"{path}.to", f"expected an index in [0, {n_prof})")

    _require_keys(cfg["switching"], "switching", {"threshold", "alpha_bar"})
    thr = _require_number(cfg["switching"]["threshold"], "switching.threshold",
                          nonnegative=True)
    if thr >= 1.0:
        _fail("switching.threshold", "must be below 1")
    ab = _require_vector(cfg["switching"]["alpha_bar"], "switching.alpha_bar", N_DIM)
    if not any(v != 0 for v in ab):
        _fail("switching.alpha_bar", "must be non-zero")

    tr = cfg["training"]
    _require_keys(tr, "training", {"points_per_profile", "noise_std", "fit_noise",
                                   "restarts", "start"})
    n = tr["points_per_profile"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        _fail("training.points_per_profile", "expected an integer >= 2")
    _require_number(tr["noise_std"], "training.noise_std", positive=True)
    if not isinstance(tr["fit_noise"], bool):
        _fail("training.fit_noise", "expected true or false")
    r = tr["restarts"]
    if isinstance(r, bool) or not isinstance(r, int) or r < 1:
        _fail("training.restarts", "expected a positive integer")
    _check_pose(tr["start"], "training.start")

    b = cfg["bound"]
    _require_keys(b, "bound", {"mode", "delta", "lambda_k", "lipschitz_pos",
                               "lipschitz_rot", "rho_bar"})
    if b["mode"] not in ("worst_case", "per_model", "axis_known"):
        _fail("bound.mode", f"unknown mode {b['mode']!r}")
    d = _require_number(b["delta"], "bound.delta", positive=True)
    if d >= 1.0:
        _fail("bound.delta", "must be below 1")
    _require_number(b["lambda_k"], "bound.lambda_k", positive=True)
    _require_number(b["lipschitz_pos"], "bound.lipschitz_pos", nonnegative=True)
    _require_number(b["lipschitz_rot"], "bound.lipschitz_rot", nonnegative=True)
    if b["rho_bar"] is not None:
        _require_number(b["rho_bar"], "bound.rho_bar", positive=True)
    return cfg


def load_config(path=None) -> dict:
    """Default config, optionally overridden by a JSON file, validated."""
    cfg = default_config()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise MissingArtifactError(f"config file {p} does not exist")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from None
        cfg = _merge(cfg, user)
    return validate_config(cfg)


# -- builders ------------------------------------------------------------------


def pose_from_config(d: dict) -> Pose:
    return Pose.from_axis_angle(d["position"], d["axis_angle"])


def gains_from_config(cfg: dict) -> ControllerGains:
    def block(v):
        return np.diag(np.asarray(v, dtype=float)) if isinstance(v, (list, tuple)) \
            else float(v) * np.eye(6)
    return ControllerGains(block(cfg["gains"]["kc"]), block(cfg["gains"]["ke"]))


def profiles_from_config(cfg: dict) -> list:
    out = []
    for prof in cfg["profiles"]:
        if prof["type"] == "vanderpol":
            out.append(VanDerPolProfile(eta=float(prof["eta"]), v=float(prof["v"])))
        else:
            path = Path(prof["path"])
            if not path.exists():
                raise MissingArtifactError(f"profile table {path} does not exist")
            out.append(TabulatedProfile.from_csv(path))
    return out


def schedule_from_config(cfg: dict) -> SwitchSchedule:
    triggers = []
    for trig in cfg["triggers"]:
        if trig["type"] == "position":
            triggers.append(PositionTrigger(
                point=np.asarray(trig["point"], dtype=float),
                tol=float(trig.get("tol", 0.05)),
                to=trig.get("to"),
                rearm=float(trig["rearm"]) if "rearm" in trig else None))
        else:
            triggers.append(TimeTrigger(at=float(trig["at"]), to=trig.get("to")))
    return SwitchSchedule(n_profiles=len(cfg["profiles"]),
                          initial=cfg["initial_profile"], triggers=triggers)


def bound_from_config(cfg: dict) -> BoundParameters:
    b = cfg["bound"]
    return BoundParameters(mode=b["mode"], delta=float(b["delta"]),
                           lambda_k=float(b["lambda_k"]),
                           lipschitz_pos=float(b["lipschitz_pos"]),
                           lipschitz_rot=float(b["lipschitz_rot"]),
                           rho_bar=None if b["rho_bar"] is None
                           else float(b["rho_bar"]))


def scenario_from_config(cfg: dict, models, case: str | None = None) -> Scenario:
    case = cfg["case"] if case is None else case
    return Scenario(
        g_wo0=pose_from_config(cfg["poses"]["target"]),
        g_wc0=pose_from_config(cfg["poses"]["camera"]),
        g_co_bar0=pose_from_config(cfg["poses"]["observer"]),
        g_d=pose_from_config(cfg["poses"]["desired"]),
        gains=gains_from_config(cfg),
        features=FeatureModel(np.asarray(cfg["features"]["points"], dtype=float),
                              float(cfg["features"]["focal_length"])),
        profiles=profiles_from_config(cfg),
        schedule=schedule_from_config(cfg),
        models=list(models),
        switched=(case == "switched"),
        threshold=float(cfg["switching"]["threshold"]),
        dt=float(cfg["dt"]),
        duration=float(cfg["duration"]),
        bound=bound_from_config(cfg),
        pixel_noise=float(cfg["pixel_noise"]),
        seed=int(cfg["seed"]),
        on_violation=cfg["on_violation"],
    )
