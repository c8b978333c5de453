"""Exception types shared across the package."""


class GpPursuitError(Exception):
    """Base class for package errors."""


class ConfigError(GpPursuitError):
    """Invalid configuration file or parameter set."""


class MissingArtifactError(GpPursuitError):
    """A required model or data file does not exist."""


class AssumptionViolation(GpPursuitError):
    """A modelling assumption failed at runtime (e.g. rotation error >= pi/2)."""


class FeatureBehindCamera(GpPursuitError):
    """A feature point left the camera's forward half-space."""


class DegenerateView(GpPursuitError):
    """The image Jacobian is rank deficient; the pose error is unobservable."""


class IllConditionedModel(GpPursuitError):
    """A kernel matrix could not be factorized."""


class FitFailure(GpPursuitError):
    """Hyperparameter search did not produce a usable optimum."""
