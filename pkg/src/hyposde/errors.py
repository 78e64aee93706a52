"""Exception hierarchy shared by all modules."""


class HypoSDEError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(HypoSDEError, ValueError):
    """Array dimensions do not match the model dimensions."""


class ArgumentError(HypoSDEError, ValueError):
    """An argument lies outside its admissible range."""


class NumericError(HypoSDEError, ArithmeticError):
    """A computation produced non-finite values."""


class DefinitenessError(NumericError):
    """A covariance matrix is not (numerically) positive definite."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class DivergenceError(NumericError):
    """A simulated path left the admissible region."""

    def __init__(self, message, step):
        super().__init__(f"{message} (step {step})")
        self.step = step


class ConfigurationError(HypoSDEError):
    """A model or experiment is missing a required ingredient."""


class ModelShapeError(HypoSDEError):
    """A model does not have the structure an algorithm requires."""


class ConsistencyError(HypoSDEError):
    """An internal identity failed; signals a construction bug."""


class DegenerateDataError(HypoSDEError, ValueError):
    """Data carry no information for the requested estimator."""


class ParseError(HypoSDEError, ValueError):
    """A data file does not follow the expected schema."""
