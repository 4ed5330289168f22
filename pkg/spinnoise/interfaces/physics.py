import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from spinnoise.helpers.constants import (
    DEFAULT_DC_TILT,
    RB87_GYROMAGNETIC_RATIO,
    SOFT_BOUND_SIGMAS,
)


class PumpWaveform(Enum):
    """Unit-peak periodic shapes of the optical pumping rate."""

    PULSE = "pulse"
    SINE = "sine"
    CONSTANT = "constant"


class PhysicalParams(BaseModel):
    """
    Spin-ensemble constants of the stochastic Bloch equation.

    The dc field lies in the x-z plane at `dc_tilt` from the pump-probe axis
    (z); the rf field is along x.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    gamma: float = Field(RB87_GYROMAGNETIC_RATIO, gt=0)
    b_dc: float = Field(6e-6, ge=0)
    b_rf_amp: float = 0.0
    omega_rf: Optional[float] = None
    rf_phase: float = 0.0
    gamma0: float = Field(2 * math.pi * 80.0, gt=0)
    alpha: float = Field(2 * math.pi * 20.0, ge=0)
    g_s: float = 0.1
    f_max: float = Field(6000.0, gt=0)
    sigma_f2: float = Field(1.0, gt=0)
    dc_tilt: float = DEFAULT_DC_TILT

    @model_validator(mode="after")
    def _finite_larmor(self):
        if self.b_dc > 0 and not math.isfinite(self.gamma * self.b_dc):
            raise ValueError("Larmor frequency gamma*b_dc must be finite")
        return self

    @property
    def omega_larmor(self) -> float:
        return self.gamma * self.b_dc

    def relaxation_rate(self, probe_power: float) -> float:
        """Total unpumped relaxation rate Γ0 + α·P_pr (s⁻¹)."""
        return self.gamma0 + self.alpha * probe_power

    def dc_field(self) -> np.ndarray:
        return self.b_dc * np.array(
            [math.sin(self.dc_tilt), 0.0, math.cos(self.dc_tilt)]
        )

    def soft_bound(self) -> float:
        return self.f_max + SOFT_BOUND_SIGMAS * math.sqrt(3.0 * self.sigma_f2)


class DriveConfig(BaseModel):
    """Per-run drive: pump and probe powers plus the pump modulation."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    pump_power: float = Field(10.0, ge=0)  # µW
    probe_power: float = Field(1.0, ge=0)  # mW
    omega_pump: float = Field(2 * math.pi * 42e3, ge=0)
    pump_rate_peak: float = Field(0.5, ge=0)  # s⁻¹ per µW at the pulse peak
    pump_waveform: PumpWaveform = PumpWaveform.PULSE
    pump_phase: float = 0.0
    polarized: bool = False
    probe_power_range: Tuple[float, float] = (0.5, 3.0)

    @model_validator(mode="after")
    def _probe_in_range(self):
        lo, hi = self.probe_power_range
        if not lo <= self.probe_power <= hi:
            raise ValueError(
                f"probe_power {self.probe_power} mW outside configured range [{lo}, {hi}]"
            )
        return self

    @property
    def peak_pump_rate(self) -> float:
        """R_OP at the waveform peak; zero for an unpolarized ensemble."""
        if not self.polarized:
            return 0.0
        return self.pump_rate_peak * self.pump_power


class TrajectoryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dt: float = Field(gt=0)
    duration: float = Field(ge=0)
    seed: int = 0
    burn_in: float = Field(0.0, ge=0)
    n_trajectories: int = Field(1, ge=1)
    chunk_steps: int = Field(4096, ge=1)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def n_burn_in(self) -> int:
        return int(round(self.burn_in / self.dt))


@dataclass
class SpinState:
    """Collective spin F at time t. `F` may carry a leading batch axis."""

    F: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=float)

    @classmethod
    def along(cls, axis: str, magnitude: float, t: float = 0.0) -> "SpinState":
        index = "xyz".index(axis)
        F = np.zeros(3)
        F[index] = magnitude
        return cls(F=F, t=t)


@dataclass
class Trajectory:
    """
    Sampled trajectories after burn-in.

    F has shape (n_trajectories, n_samples, 3); the Stokes streams have
    shape (n_trajectories, n_samples).
    """

    t: np.ndarray
    F: np.ndarray
    s1: float
    s2_out: np.ndarray
    s3_in: np.ndarray
    dt: float
    excursions: int = 0
    seed: Optional[int] = None
    extra: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.dt

    def component(self, axis: str) -> np.ndarray:
        return self.F[..., "xyz".index(axis)]
