import math
from typing import List, Literal, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from spinnoise.errors.exceptions import ConfigValidationError
from spinnoise.helpers.constants import (
    BURN_IN_RELAXATION_TIMES,
    ENV_NESTED_DELIMITER,
    ENV_PREFIX,
    MAX_PHASE_STEP,
    STEPS_PER_LARMOR_PERIOD,
)
from spinnoise.interfaces.campaign import CampaignGrid, CellKey
from spinnoise.interfaces.physics import (
    DriveConfig,
    PhysicalParams,
    PumpWaveform,
    TrajectoryConfig,
)
from spinnoise.interfaces.probe import DetectorConfig, ProbeKind, ProbeState


class DriveSettings(BaseModel):
    """Drive parameters shared by every campaign cell."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    omega_pump: Optional[float] = Field(None, ge=0)  # None: locked to ω_L
    pump_rate_peak: float = Field(0.5, ge=0)
    pump_waveform: PumpWaveform = PumpWaveform.PULSE
    pump_phase: float = 0.0
    probe_power_range: Tuple[float, float] = (0.5, 3.0)


class ProbeSettings(BaseModel):
    """Squeezed-quadrature pair before the cell; antisqueezed swaps them."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    xi2: float = Field(0.76, gt=0, lt=1)
    xibar2: float = Field(1.85, ge=1)

    @model_validator(mode="after")
    def _uncertainty(self):
        ProbeState.squeezed(self.xi2, self.xibar2)
        return self


class TrajectorySettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dt: Optional[float] = Field(None, gt=0)  # None: 1/(128·f_L)
    duration: float = Field(3.2, gt=0)
    burn_in: float = Field(0.5, ge=0)
    n_trajectories: int = Field(16, ge=1)
    chunk_steps: int = Field(4096, ge=1)


class DspSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    decim: int = Field(512, ge=1)
    lp_cutoff: Optional[float] = Field(None, gt=0)  # None: 0.4·f_s_out
    segment_len: int = Field(2048, ge=8)
    overlap: float = Field(0.5, ge=0, lt=1)
    window: str = "hann"
    mask_bands: List[Tuple[float, float]] = [(45.0, 55.0), (3900.0, 4100.0)]
    f_min: float = Field(0.0, ge=0)
    f_max: Optional[float] = Field(None, gt=0)  # None: lp_cutoff


class FitSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_boot: int = Field(200, ge=1)
    bootstrap_method: Literal["parametric", "segments"] = "parametric"
    max_iter: int = Field(500, ge=10)
    degenerate_pvalue: float = Field(1e-3, gt=0, lt=1)
    max_failed_fraction: float = Field(0.2, ge=0, le=1)
    exclude_top_peak_point: bool = True


class RunConfig(BaseSettings):
    """
    Validated run document. Every key can be overridden from the environment
    as SPINNOISE_<SECTION>__<KEY>; environment values win over the file.
    """

    model_config = SettingsConfigDict(
        extra="forbid",
        env_prefix=ENV_PREFIX,
        env_nested_delimiter=ENV_NESTED_DELIMITER,
        frozen=True,
    )

    physical: PhysicalParams = PhysicalParams()
    drive: DriveSettings = DriveSettings()
    probe: ProbeSettings = ProbeSettings()
    detector: DetectorConfig = DetectorConfig()
    trajectory: TrajectorySettings = TrajectorySettings()
    grid: CampaignGrid = CampaignGrid()
    dsp: DspSettings = DspSettings()
    fit: FitSettings = FitSettings()
    output_dir: str = "results"
    jobs: int = Field(1, ge=1)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ):
        return env_settings, init_settings, dotenv_settings, file_secret_settings

    @model_validator(mode="after")
    def _cross_section_invariants(self):
        omega_l = self.physical.omega_larmor
        if self.trajectory.dt is None and omega_l == 0:
            raise ValueError("trajectory.dt is required when physical.b_dc = 0")
        dt = self.dt
        if dt * omega_l > MAX_PHASE_STEP:
            raise ValueError(
                f"trajectory.dt*omega_L = {dt * omega_l:.4g} exceeds {MAX_PHASE_STEP}"
            )
        min_burn = BURN_IN_RELAXATION_TIMES / self.physical.gamma0
        if self.trajectory.burn_in < min_burn:
            raise ValueError(
                f"trajectory.burn_in must be >= 5/gamma0 = {min_burn:.4g} s"
            )
        if self.detector.sample_rate is not None and not math.isclose(
            self.detector.sample_rate * dt, 1.0, rel_tol=1e-9
        ):
            raise ValueError("detector.sample_rate must equal 1/trajectory.dt")
        self.detector.check_sample_rate(omega_l / (2 * math.pi), self.sample_rate)
        if not self.lp_cutoff < self.f_s_out / 2:
            raise ValueError(
                f"dsp.lp_cutoff {self.lp_cutoff:g} Hz must be below f_s_out/2 = {self.f_s_out / 2:g} Hz"
            )
        if self.f_pump >= self.sample_rate / 2:
            raise ValueError("pump reference frequency is above the Nyquist frequency")
        samples_out = self.trajectory.duration * self.f_s_out
        if self.dsp.segment_len > samples_out:
            raise ValueError(
                f"dsp.segment_len {self.dsp.segment_len} exceeds the {samples_out:.0f} "
                "demodulated samples per trajectory"
            )
        return self

    @property
    def dt(self) -> float:
        if self.trajectory.dt is not None:
            return self.trajectory.dt
        f_l = self.physical.omega_larmor / (2 * math.pi)
        return 1.0 / (STEPS_PER_LARMOR_PERIOD * f_l)

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.dt

    @property
    def f_s_out(self) -> float:
        return self.sample_rate / self.dsp.decim

    @property
    def lp_cutoff(self) -> float:
        return self.dsp.lp_cutoff if self.dsp.lp_cutoff is not None else 0.4 * self.f_s_out

    @property
    def f_max(self) -> float:
        return self.dsp.f_max if self.dsp.f_max is not None else self.lp_cutoff

    @property
    def omega_pump(self) -> float:
        if self.drive.omega_pump is not None:
            return self.drive.omega_pump
        return self.physical.omega_larmor

    @property
    def f_pump(self) -> float:
        return self.omega_pump / (2 * math.pi)

    def trajectory_config(self, seed: int = 0, **overrides) -> TrajectoryConfig:
        fields = dict(
            dt=self.dt,
            duration=self.trajectory.duration,
            burn_in=self.trajectory.burn_in,
            n_trajectories=self.trajectory.n_trajectories,
            chunk_steps=self.trajectory.chunk_steps,
            seed=seed,
        )
        fields.update(overrides)
        return TrajectoryConfig(**fields)

    def drive_config(
        self, probe_power: float, pump_power: float, polarized: bool
    ) -> DriveConfig:
        return DriveConfig(
            pump_power=pump_power,
            probe_power=probe_power,
            omega_pump=self.omega_pump,
            pump_rate_peak=self.drive.pump_rate_peak,
            pump_waveform=self.drive.pump_waveform,
            pump_phase=self.drive.pump_phase,
            polarized=polarized,
            probe_power_range=self.drive.probe_power_range,
        )

    def drive_for(self, key: CellKey) -> DriveConfig:
        return self.drive_config(key.probe_power, key.pump_power, key.polarized)

    def probe_states(self, kind: ProbeKind) -> Tuple[ProbeState, ProbeState]:
        """(pre-cell state driving back-action, detected state after loss)."""
        from spinnoise.readout.probe import apply_loss

        pre = ProbeState.of_kind(kind, self.probe.xi2, self.probe.xibar2)
        return pre, apply_loss(pre, self.detector.detection_efficiency)

    @classmethod
    def desk_preset(cls, **sections) -> "RunConfig":
        """
        Laboratory physics scaled to a 100 Hz Larmor frequency and a 5 Hz
        intrinsic linewidth so full campaigns finish in minutes.
        """
        gamma = PhysicalParams.model_fields["gamma"].default
        data = dict(
            physical=dict(
                b_dc=100.0 / (gamma / (2 * math.pi)),
                gamma0=2 * math.pi * 5.0,
                alpha=10.47,
                g_s=0.1,
                f_max=6000.0,
                sigma_f2=4.0,
            ),
            trajectory=dict(duration=3.2, burn_in=0.5, n_trajectories=64),
            dsp=dict(
                decim=64,
                lp_cutoff=80.0,
                segment_len=256,
                mask_bands=[],
                f_max=60.0,
            ),
            fit=dict(n_boot=100),
        )
        for name, values in sections.items():
            if isinstance(values, dict) and isinstance(data.get(name), dict):
                data[name] = {**data[name], **values}
            else:
                data[name] = values
        try:
            return cls(**data)
        except ValidationError as e:
            raise ConfigValidationError.from_pydantic(e) from e
