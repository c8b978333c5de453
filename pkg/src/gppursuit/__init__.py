"""Visual pursuit of a target that switches among learned motion profiles."""

from .backend import active_backend
from .geometry import Pose, Twist
from .gpmodel import Dataset, GpModel, Hyperparameters, fit_hyperparameters
from .motion import (MotionProfile, PositionTrigger, SwitchSchedule,
                     TabulatedProfile, TimeTrigger, VanDerPolProfile)
from .pursuit import BoundParameters, ControllerGains
from .simulate import Scenario, Trace, mse, run_scenario
from .vision import FeatureModel

__version__ = "0.1.0"

__all__ = [
    "BoundParameters", "ControllerGains", "Dataset", "FeatureModel",
    "GpModel", "Hyperparameters", "MotionProfile", "Pose", "PositionTrigger",
    "Scenario", "SwitchSchedule", "TabulatedProfile", "TimeTrigger", "Trace",
    "Twist", "VanDerPolProfile", "active_backend", "fit_hyperparameters",
    "mse", "run_scenario", "__version__",
]
