from .exceptions import (
    AliasError,
    BootstrapError,
    ConfigError,
    ConfigParseError,
    ConfigValidationError,
    CustomException,
    InsufficientPointsError,
    NonConvergenceError,
    NonFiniteError,
    NonPositiveError,
    SingularFitError,
    SmallAngleViolation,
    SpectrumValidationError,
    UndefinedRatioError,
)

__all__ = [
    "AliasError",
    "BootstrapError",
    "ConfigError",
    "ConfigParseError",
    "ConfigValidationError",
    "CustomException",
    "InsufficientPointsError",
    "NonConvergenceError",
    "NonFiniteError",
    "NonPositiveError",
    "SingularFitError",
    "SmallAngleViolation",
    "SpectrumValidationError",
    "UndefinedRatioError",
]
