"""Exception types shared across the package."""


class SplitspinError(Exception):
    """Base class for errors raised by this package."""


class ExactSizeLimitError(SplitspinError):
    """Raised when the exact four-mode engine is asked for too many atoms."""


class IncompleteDatasetError(SplitspinError):
    """Raised when a shot dataset lacks the measurement settings an estimator needs."""


class ModelError(SplitspinError):
    """Raised when inputs violate a modeling assumption (e.g. non-PSD covariance)."""


class UndefinedValueError(SplitspinError):
    """Raised when a requested quantity is mathematically undefined for the input."""


class CalibrationError(SplitspinError):
    """Raised when a calibration fit is unidentifiable or fails to converge."""
