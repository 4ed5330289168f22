import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

PARAMETER_NAMES = ("s_psn", "s_atomic", "delta_f")


class FitFlag(Enum):
    DEGENERATE_SPECTRUM = "degenerate_spectrum"
    NEGATIVE_ESTIMATE = "negative_estimate"
    EXCLUDED_PEAK_POINT = "excluded_peak_point"
    BOUND_EXCURSION = "bound_excursion"
    UNDEFINED_RATIO = "undefined_ratio"
    DROPPED_POINT = "dropped_point"


@dataclass(frozen=True)
class NoiseFitModel:
    """
    Composite noise PSD: xi2·S_psn + S_atomic·L(f; Δf).

    S_atomic is the combined SPN + xibar2·MBA peak level.
    """

    s_psn: float
    s_atomic: float
    delta_f: float
    xi2: float = 1.0

    def __post_init__(self):
        if self.s_psn < 0 or self.s_atomic < 0:
            raise ValueError("noise levels must be non-negative")
        if not self.delta_f > 0:
            raise ValueError("delta_f must be positive")

    @property
    def psn_floor(self) -> float:
        return self.xi2 * self.s_psn

    def as_array(self) -> np.ndarray:
        return np.array([self.s_psn, self.s_atomic, self.delta_f])

    def psd(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        d2 = self.delta_f**2
        return self.psn_floor + self.s_atomic * d2 / (f**2 + d2)


@dataclass
class FitResult:
    model: NoiseFitModel
    loglik: float
    n_used: int
    cov: np.ndarray
    flags: List[FitFlag] = field(default_factory=list)
    reduced_chi2: float = float("nan")
    n_iter: int = 0

    @property
    def psn_floor(self) -> float:
        return self.model.psn_floor

    @property
    def degenerate(self) -> bool:
        return FitFlag.DEGENERATE_SPECTRUM in self.flags

    def stderr(self) -> Dict[str, float]:
        diag = np.sqrt(np.clip(np.diag(self.cov), 0.0, None))
        return dict(zip(PARAMETER_NAMES, diag.tolist()))

    def total_power_stderr(self) -> float:
        """Delta-method error of S_atomic·Δf·π/2."""
        s, d = self.model.s_atomic, self.model.delta_f
        grad = np.array([0.0, d, s]) * (math.pi / 2)
        return float(math.sqrt(max(grad @ self.cov @ grad, 0.0)))

    def to_dict(self) -> dict:
        return {
            "s_psn": self.model.s_psn,
            "s_atomic": self.model.s_atomic,
            "delta_f": self.model.delta_f,
            "xi2": self.model.xi2,
            "psn_floor": self.psn_floor,
            "loglik": self.loglik,
            "n_used": self.n_used,
            "cov": self.cov,
            "flags": [f.value for f in self.flags],
            "reduced_chi2": self.reduced_chi2,
        }


# (p16, p50, p84)
Interval = Tuple[float, float, float]


@dataclass
class BootstrapResult:
    """Replica fits kept in replica-index order; None marks a failed replica."""

    point: FitResult
    replicas: List[Optional[FitResult]]
    percentiles: Dict[str, Interval]
    n_failed: int = 0
    method: str = "parametric"

    @property
    def n_boot(self) -> int:
        return len(self.replicas)

    def replica_values(self, name: str) -> np.ndarray:
        """Per-replica value of `name`, NaN for failed replicas."""
        out = np.full(len(self.replicas), np.nan)
        for i, rep in enumerate(self.replicas):
            if rep is not None:
                out[i] = replica_quantity(rep, name)
        return out

    def halfwidth(self, name: str) -> float:
        lo, _, hi = self.percentiles[name]
        return 0.5 * (hi - lo)


def replica_quantity(fit: FitResult, name: str) -> float:
    m = fit.model
    if name == "total":
        return m.s_atomic * m.delta_f * math.pi / 2
    if name == "psn_floor":
        return m.psn_floor
    return float(getattr(m, name))


@dataclass
class MbaEstimate:
    mba_tot: float
    # Total divided by xibar2: the back-action term before antisqueezing
    mba_intrinsic: float
    flags: List[FitFlag] = field(default_factory=list)


@dataclass
class NoiseDecomposition:
    """PSN / SPN / MBA split for one (channel, kind, P_pr, P_pu) pair of runs."""

    psn: float
    psn_floor: float
    spn_peak: float
    spn_tot: float
    mba_tot: float
    delta_f_unpol: float
    delta_f_pol: Optional[float]
    ci68: Dict[str, Interval]
    psn_floor_pol: Optional[float] = None
    flags: List[FitFlag] = field(default_factory=list)
    unpol_fit: Optional[FitResult] = None
    pol_fit: Optional[FitResult] = None

    def sigma(self, name: str) -> float:
        """Half-width of the 68 % interval for `name`."""
        if name not in self.ci68:
            return float("nan")
        lo, _, hi = self.ci68[name]
        return 0.5 * (hi - lo)

    def to_dict(self) -> dict:
        return {
            "psn": self.psn,
            "psn_floor": self.psn_floor,
            "spn_peak": self.spn_peak,
            "spn_tot": self.spn_tot,
            "mba_tot": self.mba_tot,
            "delta_f_unpol": self.delta_f_unpol,
            "delta_f_pol": self.delta_f_pol,
            "psn_floor_pol": self.psn_floor_pol,
            "ci68": {k: list(v) for k, v in self.ci68.items()},
            "flags": [f.value for f in self.flags],
        }
