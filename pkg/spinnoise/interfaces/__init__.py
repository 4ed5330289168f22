from .physics import (
    DriveConfig,
    PhysicalParams,
    PumpWaveform,
    SpinState,
    Trajectory,
    TrajectoryConfig,
)
from .probe import DetectorConfig, ProbeKind, ProbeState, StokesSample
from .spectrum import Channel, DemodChannels, SpectrumMeta, SpectrumRecord, TimeSeries
from .fit import (
    BootstrapResult,
    FitFlag,
    FitResult,
    MbaEstimate,
    NoiseDecomposition,
    NoiseFitModel,
)
from .scaling import ConstantFit, ExponentEstimate, ScalingFit, ScalingPoint
from .campaign import (
    CampaignGrid,
    CampaignReport,
    CellFailure,
    CellKey,
    CellResult,
    DecompositionEntry,
)
from .config import (
    DriveSettings,
    DspSettings,
    FitSettings,
    ProbeSettings,
    RunConfig,
    TrajectorySettings,
)
