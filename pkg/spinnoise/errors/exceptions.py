from typing import Any, Dict, Optional

from pydantic import ValidationError

from spinnoise.constants.messages import SpinNoiseMessages

USER_ERROR_EXIT_CODE = 1
INTERNAL_ERROR_EXIT_CODE = 2


class CustomException(Exception):
    exit_code: int = INTERNAL_ERROR_EXIT_CODE

    def __init__(
        self, message: Optional[str] = None, extra_info: Optional[dict] = None
    ):
        self.message = message
        self.extra_info = extra_info
        super().__init__(self.message)

    def __str__(self):
        if self.extra_info:
            return f"{self.message} (Extra Info: {self.extra_info})"
        return self.message

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form printed by the CLI on failure."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "extra_info": self.extra_info or {},
            "exit_code": self.exit_code,
        }


# User errors


class ConfigError(CustomException):
    exit_code = USER_ERROR_EXIT_CODE

    def __init__(
        self,
        message: str = SpinNoiseMessages.INVALID_CONFIG,
        extra_info: Optional[dict] = None,
    ):
        super().__init__(message, extra_info)


class ConfigValidationError(ConfigError):
    def __init__(self, message: str, key: Optional[str] = None, **extra):
        info = {"key": key, **extra} if key is not None else dict(extra)
        self.key = key
        super().__init__(message, info or None)

    @classmethod
    def from_pydantic(cls, e: ValidationError) -> "ConfigValidationError":
        """First error of a pydantic ValidationError, keyed by its dotted location."""
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or None
        message = first["msg"]
        if message.startswith("Value error, "):
            message = message[len("Value error, ") :]
        return cls(message, key=key, n_errors=e.error_count())


class ConfigParseError(ConfigError):
    def __init__(
        self, message: str, line: Optional[int] = None, key: Optional[str] = None
    ):
        self.line = line
        self.key = key
        super().__init__(message, {"line": line, "key": key})


class SpectrumValidationError(CustomException):
    exit_code = USER_ERROR_EXIT_CODE

    def __init__(
        self,
        message: str = SpinNoiseMessages.ALL_BINS_MASKED,
        extra_info: Optional[dict] = None,
    ):
        super().__init__(message, extra_info)


class InsufficientPointsError(CustomException):
    exit_code = USER_ERROR_EXIT_CODE

    def __init__(self, required: int, got: int):
        super().__init__(
            SpinNoiseMessages.INSUFFICIENT_POINTS, {"required": required, "got": got}
        )


# Numerical / internal errors


class NonFiniteError(CustomException):
    def __init__(self, message: str = SpinNoiseMessages.NON_FINITE_STATE, **extra):
        super().__init__(message, extra or None)


class SmallAngleViolation(CustomException):
    def __init__(self, max_rotation: float):
        self.max_rotation = max_rotation
        super().__init__(
            SpinNoiseMessages.SMALL_ANGLE_VIOLATION, {"max_rotation": max_rotation}
        )


class AliasError(CustomException):
    def __init__(self, message: str = SpinNoiseMessages.ALIAS_VIOLATION, **extra):
        super().__init__(message, extra or None)


class NonConvergenceError(CustomException):
    def __init__(self, message: str = SpinNoiseMessages.NON_CONVERGENCE, **extra):
        super().__init__(message, extra or None)


class BootstrapError(CustomException):
    def __init__(self, n_failed: int, n_boot: int):
        self.n_failed = n_failed
        self.n_boot = n_boot
        super().__init__(
            SpinNoiseMessages.BOOTSTRAP_DIVERGED,
            {"n_failed": n_failed, "n_boot": n_boot},
        )


class SingularFitError(CustomException):
    def __init__(self, message: str = SpinNoiseMessages.SINGULAR_FIT, **extra):
        super().__init__(message, extra or None)


class NonPositiveError(CustomException):
    def __init__(self, message: str = SpinNoiseMessages.NON_POSITIVE, **extra):
        super().__init__(message, extra or None)


class UndefinedRatioError(CustomException):
    def __init__(self, a_state: float, a_coherent: float):
        super().__init__(
            SpinNoiseMessages.UNDEFINED_RATIO,
            {"a_state": a_state, "a_coherent": a_coherent},
        )
