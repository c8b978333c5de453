"""Shared fixtures: the nominal scenario trained and simulated once per session."""

import pytest

from gppursuit.config import (default_config, pose_from_config,
                              profiles_from_config, scenario_from_config)
from gppursuit.simulate import (generate_training, run_scenario, train_single,
                                train_switched)


@pytest.fixture(scope="session")
def nominal_cfg():
    return default_config()


@pytest.fixture(scope="session")
def profiles(nominal_cfg):
    return profiles_from_config(nominal_cfg)


@pytest.fixture(scope="session")
def datasets(nominal_cfg, profiles):
    tr = nominal_cfg["training"]
    return generate_training(profiles, tr["points_per_profile"],
                             tr["noise_std"], seed=0,
                             start=pose_from_config(tr["start"]))


@pytest.fixture(scope="session")
def switched_models(nominal_cfg, datasets):
    return train_switched(datasets, seed=0,
                          noise_std=nominal_cfg["training"]["noise_std"])


@pytest.fixture(scope="session")
def single_model(datasets):
    return train_single(datasets, seed=0)


@pytest.fixture(scope="session")
def nominal_trace(nominal_cfg, switched_models):
    return run_scenario(scenario_from_config(nominal_cfg, switched_models,
                                             case="switched"))
