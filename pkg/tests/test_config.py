import json

import numpy as np
import pytest

from gppursuit.config import (bound_from_config, default_config,
                              gains_from_config, load_config,
                              pose_from_config, profiles_from_config,
                              scenario_from_config, schedule_from_config,
                              validate_config)
from gppursuit.errors import ConfigError, MissingArtifactError
from gppursuit.motion import TabulatedProfile, VanDerPolProfile


def patched(patch: dict) -> dict:
    def apply(target, override):
        for key, value in override.items():
            if isinstance(value, dict) and isinstance(target.get(key), dict):
                apply(target[key], value)
            else:
                target[key] = value
    cfg = default_config()
    apply(cfg, patch)
    return cfg


def test_defaults_validate():
    validate_config(default_config())


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        validate_config(patched({"not_a_key": 1}))
    with pytest.raises(ConfigError, match="unknown"):
        validate_config(patched({"gains": {"kq": 3.0}}))
    with pytest.raises(ConfigError, match="unknown"):
        validate_config(patched({"training": {"num_points": 10}}))


@pytest.mark.parametrize("patch", [
    {"dt": 0.0},
    {"dt": -0.01},
    {"duration": -1.0},
    {"seed": True},
    {"seed": 1.5},
    {"case": "both"},
    {"switching": {"threshold": 1.0}},
    {"switching": {"threshold": -0.1}},
    {"switching": {"alpha_bar": [0, 0, 0, 0, 0, 0]}},
    {"initial_profile": 7},
    {"gains": {"kc": [1.0, 2.0]}},
    {"gains": {"ke": -1.0}},
    {"features": {"points": [[0.0, 0.0, 0.1]]}},
    {"profiles": [{"type": "pendulum"}]},
    {"profiles": []},
    {"triggers": [{"type": "altitude", "at": 1.0}]},
    {"triggers": [{"type": "position", "point": [2, 0, 0], "to": 5}]},
    {"bound": {"mode": "optimistic"}},
    {"bound": {"delta": 0.0}},
    {"bound": {"delta": 1.0}},
    {"training": {"fit_noise": "yes"}},
    {"training": {"points_per_profile": 1}},
    {"on_violation": "panic"},
])
def test_bad_values_rejected(patch):
    with pytest.raises(ConfigError):
        validate_config(patched(patch))


def test_load_config_merges_onto_defaults(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"duration": 4.0, "gains": {"kc": 5.0}}))
    cfg = load_config(path)
    assert cfg["duration"] == 4.0
    assert cfg["gains"]["kc"] == 5.0
    assert cfg["gains"]["ke"] == 17.0
    assert cfg["dt"] == 0.02


def test_load_config_rejects_unknown_file_key(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"gians": {}}))
    with pytest.raises(ConfigError, match="unknown"):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(MissingArtifactError):
        load_config(tmp_path / "nope.json")


def test_load_config_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_pose_builder():
    pose = pose_from_config({"position": [1.0, 2.0, 3.0],
                             "axis_angle": [0.0, 0.0, np.pi / 2]})
    assert np.allclose(pose.p, [1.0, 2.0, 3.0])
    assert np.allclose(pose.r @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0])


def test_gains_builder_scalar_and_vector():
    g = gains_from_config({"gains": {"kc": 10.0, "ke": 17.0}})
    assert np.allclose(g.kc, 10.0 * np.eye(6))
    v = gains_from_config({"gains": {"kc": [1, 2, 3, 4, 5, 6], "ke": 2.0}})
    assert np.allclose(np.diag(v.kc), [1, 2, 3, 4, 5, 6])
    assert v.min_eigenvalue(np.eye(3)) > 0.0


def test_profiles_builder():
    profiles = profiles_from_config(default_config())
    assert len(profiles) == 2
    assert isinstance(profiles[0], VanDerPolProfile)
    assert profiles[0].eta == 0.5 and profiles[0].v == 1.0
    assert profiles[1].eta == 1.5 and profiles[1].v == 0.5


def test_tabulated_profile_from_config(tmp_path, profiles):
    path = tmp_path / "field.csv"
    xs = np.linspace(-3.0, 3.0, 13)
    rows = ["x,y,ax,ay,wz"]
    for x in xs:
        for y in xs:
            vel = profiles[0].planar_rates(np.array([x, y, 0.0]))
            rows.append(",".join(repr(float(v))
                                 for v in (x, y) + tuple(vel)))
    path.write_text("\n".join(rows) + "\n")
    cfg = patched({"profiles": [{"type": "tabulated", "path": str(path)}],
                   "initial_profile": 0,
                   "triggers": []})
    built = profiles_from_config(validate_config(cfg))
    assert isinstance(built[0], TabulatedProfile)


def test_tabulated_profile_missing_file(tmp_path):
    cfg = patched({"profiles": [{"type": "tabulated",
                                 "path": str(tmp_path / "x.csv")}],
                   "initial_profile": 0,
                   "triggers": []})
    with pytest.raises(MissingArtifactError):
        profiles_from_config(validate_config(cfg))


def test_schedule_builder_defaults_rearm():
    sched = schedule_from_config(default_config())
    assert sched.n_profiles == 2
    trig = sched.triggers[0]
    assert trig.tol == 0.05 and trig.rearm == pytest.approx(0.1)


def test_schedule_builder_time_trigger():
    cfg = patched({"triggers": [{"type": "time", "at": 5.0, "to": 1}]})
    sched = schedule_from_config(validate_config(cfg))
    assert sched.triggers[0].at == 5.0 and sched.triggers[0].to == 1


def test_bound_builder():
    bound = bound_from_config(default_config())
    assert bound.mode == "axis_known"
    assert bound.lambda_k == 10.0
    assert bound.lambda_k_tilde() == pytest.approx(2.0)


def test_scenario_case_override(switched_models, single_model):
    cfg = patched({"duration": 1.0})
    scn = scenario_from_config(cfg, switched_models)
    assert scn.switched and len(scn.models) == 2
    single = scenario_from_config(cfg, [single_model], case="single")
    assert not single.switched and len(single.models) == 1
    with pytest.raises(ValueError):
        scenario_from_config(cfg, [single_model], case="switched")
