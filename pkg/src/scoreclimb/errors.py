"""Exception hierarchy shared across the package."""


class ScoreclimbError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ScoreclimbError):
    """Invalid setup: mismatched dimensions, bad hyperparameters, unknown config keys."""


class NumericalError(ScoreclimbError):
    """Non-finite values encountered where finite ones are required."""


class DegenerateWeightsError(NumericalError):
    """Every particle weight is zero (log-weight -inf); resampling is impossible."""
