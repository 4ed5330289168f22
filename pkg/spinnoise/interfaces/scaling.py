from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional

import numpy as np

from spinnoise.interfaces.fit import FitFlag


class ScalingPoint(NamedTuple):
    """One (power, value, 1σ) point of a scaling series."""

    p: float
    y: float
    sigma: float


@dataclass(frozen=True)
class ScalingFit:
    """y = a0 + a_n·Pⁿ with absolute-sigma standard errors."""

    exponent_n: float
    a_n: float
    a0: float
    stderr_a_n: float
    stderr_a0: float
    chi2: float = float("nan")
    dof: int = 0
    db_vs_coherent: Optional[float] = None
    db_stderr: Optional[float] = None
    flags: List[FitFlag] = field(default_factory=list)

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def predict(self, p) -> np.ndarray:
        return self.a0 + self.a_n * np.asarray(p, dtype=float) ** self.exponent_n

    def with_db(self, db: Optional[float], db_stderr: Optional[float]) -> "ScalingFit":
        flags = list(self.flags)
        if db is None and FitFlag.UNDEFINED_RATIO not in flags:
            flags.append(FitFlag.UNDEFINED_RATIO)
        return replace(self, db_vs_coherent=db, db_stderr=db_stderr, flags=flags)


@dataclass(frozen=True)
class ConstantFit:
    """Weighted mean y = c."""

    value: float
    stderr: float
    chi2: float
    dof: int


@dataclass(frozen=True)
class ExponentEstimate:
    """
    Free-exponent statistics: the log-log slope of (y − a0) vs P and the
    exponent of a direct a0 + c·Pⁿ fit.
    """

    slope: float
    slope_stderr: float
    a0: float
    nonlinear_n: float
    nonlinear_n_stderr: float
    # False when y − a0 had non-positive points and only the direct fit exists
    slope_defined: bool = True

    @property
    def value(self) -> float:
        return self.slope if self.slope_defined else self.nonlinear_n

    @property
    def stderr(self) -> float:
        return self.slope_stderr if self.slope_defined else self.nonlinear_n_stderr
