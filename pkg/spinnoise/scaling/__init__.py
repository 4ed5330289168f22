from .power_law import (
    db_ratio,
    db_ratio_stderr,
    estimate_exponent,
    fit_constant,
    fit_free_exponent,
    fit_power_law,
)
from .tables import ScalingTables

__all__ = [
    "ScalingTables",
    "db_ratio",
    "db_ratio_stderr",
    "estimate_exponent",
    "fit_constant",
    "fit_free_exponent",
    "fit_power_law",
]
