from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

_UNCERTAINTY_TOL = 1e-12


class ProbeKind(Enum):
    COHERENT = "coherent"
    SQUEEZED = "squeezed"
    ANTISQUEEZED = "antisqueezed"

    @property
    def label(self) -> str:
        """Short label used in table rows (coh, sq, asq)."""
        return {"coherent": "coh", "squeezed": "sq", "antisqueezed": "asq"}[
            self.value
        ]


class ProbeState(BaseModel):
    """
    Quantum state of the probe light.

    `xi2` always scales the detected S2 noise and `xibar2` the conjugate S3
    noise that drives back-action. `loss` is the accumulated power
    transmission already folded into both factors.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ProbeKind = ProbeKind.COHERENT
    xi2: float = Field(1.0, gt=0)
    xibar2: float = Field(1.0, gt=0)
    loss: float = Field(1.0, gt=0, le=1)

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == ProbeKind.COHERENT:
            if self.xi2 != 1.0 or self.xibar2 != 1.0:
                raise ValueError("coherent probe requires xi2 = xibar2 = 1")
            return self
        if self.xi2 * self.xibar2 < 1.0 - _UNCERTAINTY_TOL:
            raise ValueError(
                f"xi2*xibar2 = {self.xi2 * self.xibar2:.6g} violates the uncertainty bound"
            )
        if self.kind == ProbeKind.SQUEEZED and not self.xi2 < 1.0 <= self.xibar2:
            raise ValueError("squeezed probe requires xi2 < 1 <= xibar2")
        if self.kind == ProbeKind.ANTISQUEEZED and not self.xibar2 < 1.0 <= self.xi2:
            raise ValueError("antisqueezed probe requires xibar2 < 1 <= xi2")
        return self

    @classmethod
    def coherent(cls) -> "ProbeState":
        return cls()

    @classmethod
    def squeezed(cls, xi2: float, xibar2: float) -> "ProbeState":
        return cls(kind=ProbeKind.SQUEEZED, xi2=xi2, xibar2=xibar2)

    @classmethod
    def antisqueezed(cls, xi2: float, xibar2: float) -> "ProbeState":
        """Detected S2 noise enhanced by `xi2` (> 1), S3 reduced by `xibar2`."""
        return cls(kind=ProbeKind.ANTISQUEEZED, xi2=xi2, xibar2=xibar2)

    @classmethod
    def from_db(cls, squeezing_db: float, antisqueezing_db: float) -> "ProbeState":
        return cls.squeezed(
            xi2=10 ** (-abs(squeezing_db) / 10),
            xibar2=10 ** (abs(antisqueezing_db) / 10),
        )

    @classmethod
    def of_kind(cls, kind: ProbeKind, xi2: float, xibar2: float) -> "ProbeState":
        """Build `kind` from the squeezed-quadrature pair (xi2 < 1 <= xibar2)."""
        if kind == ProbeKind.COHERENT:
            return cls.coherent()
        squeezed = cls.squeezed(xi2, xibar2)
        return squeezed if kind == ProbeKind.SQUEEZED else squeezed.swapped()

    def swapped(self) -> "ProbeState":
        """Rotate the squeezing ellipse by 90°: S2 and S3 noise exchange."""
        kind = {
            ProbeKind.COHERENT: ProbeKind.COHERENT,
            ProbeKind.SQUEEZED: ProbeKind.ANTISQUEEZED,
            ProbeKind.ANTISQUEEZED: ProbeKind.SQUEEZED,
        }[self.kind]
        return ProbeState(kind=kind, xi2=self.xibar2, xibar2=self.xi2, loss=self.loss)

    @property
    def squeezing_db(self) -> float:
        return float(10 * np.log10(self.xi2))


@dataclass
class StokesSample:
    """
    Probe Stokes components over a uniformly sampled window.

    `s1` is the mean (∝ P_pr); the noise streams may carry a leading batch
    axis matching the spin trajectories.
    """

    s1: float
    s2_noise: np.ndarray
    s3_noise: np.ndarray
    f_s: float
    t0: float = 0.0

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(self.s2_noise.shape[-1]) / self.f_s


class DetectorConfig(BaseModel):
    """Balanced polarimeter and detection chain."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    gain: float = Field(1.0, gt=0)
    g_f: float = Field(0.0005, gt=0)
    sample_rate: Optional[float] = Field(None, gt=0)
    shot_noise_constant: float = Field(9.8, ge=0)
    s1_per_mw: float = Field(20580.0, gt=0)
    detection_efficiency: float = Field(1.0, gt=0, le=1)
    technical_tones: List[Tuple[float, float]] = []

    def s1(self, probe_power: float) -> float:
        return self.s1_per_mw * probe_power

    def check_sample_rate(self, f_larmor: float, f_s: Optional[float] = None) -> None:
        f_s = f_s if f_s is not None else self.sample_rate
        if f_s is not None and not f_s > 4 * f_larmor:
            raise ValueError(
                f"sample_rate {f_s:g} Hz must exceed 4*f_L = {4 * f_larmor:g} Hz"
            )
