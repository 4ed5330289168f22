from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from spinnoise.interfaces.fit import BootstrapResult, FitResult, NoiseDecomposition
from spinnoise.interfaces.probe import ProbeKind
from spinnoise.interfaces.spectrum import Channel, SpectrumRecord


class CampaignGrid(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    probe_powers: List[float] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    pump_powers: List[float] = [5.0, 10.0, 15.0]
    probe_kinds: List[ProbeKind] = [
        ProbeKind.COHERENT,
        ProbeKind.SQUEEZED,
        ProbeKind.ANTISQUEEZED,
    ]
    channels: List[Channel] = [Channel.DC, Channel.RF]
    polarizations: List[bool] = [False, True]
    replicates: int = Field(1, ge=1)
    base_seed: int = 0

    @field_validator(
        "probe_powers", "pump_powers", "probe_kinds", "channels", "polarizations"
    )
    @classmethod
    def _non_empty(cls, value, info):
        if len(value) == 0:
            raise ValueError(f"{info.field_name} must not be empty")
        if len(set(value)) != len(value):
            raise ValueError(f"{info.field_name} contains duplicates")
        return value

    @field_validator("probe_powers", "pump_powers")
    @classmethod
    def _positive(cls, value, info):
        if any(p <= 0 for p in value):
            raise ValueError(f"{info.field_name} must be positive")
        return sorted(value)

    @property
    def top_probe_power(self) -> float:
        return max(self.probe_powers)

    def cells(self) -> List["CellKey"]:
        """
        Every simulated cell in grid order. Unpolarized runs have the pump
        off and so are simulated once per (kind, P_pr), keyed at P_pu = 0.
        """
        keys = []
        for kind in self.probe_kinds:
            for ipr, p_pr in enumerate(self.probe_powers):
                if False in self.polarizations:
                    keys.append(CellKey(kind, p_pr, 0.0, False, (ipr, 0, 0)))
                if True in self.polarizations:
                    for ipu, p_pu in enumerate(self.pump_powers):
                        keys.append(CellKey(kind, p_pr, p_pu, True, (ipr, ipu, 1)))
        return keys


@dataclass(frozen=True)
class CellKey:
    kind: ProbeKind
    probe_power: float
    pump_power: float
    polarized: bool
    # Seed indices; the probe kind is deliberately absent so every kind sees
    # the same spin and shot-noise realizations (common random numbers).
    seed_index: Tuple[int, int, int] = (0, 0, 0)

    @property
    def pol_label(self) -> str:
        return "pol" if self.polarized else "unpol"

    def path_parts(self, channel: Channel) -> Tuple[str, ...]:
        return (
            channel.value,
            self.kind.value,
            f"pu{self.pump_power:g}",
            f"pr{self.probe_power:g}",
            self.pol_label,
        )

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "probe_power": self.probe_power,
            "pump_power": self.pump_power,
            "polarized": self.polarized,
        }


@dataclass
class CellResult:
    key: CellKey
    spectra: Dict[Channel, SpectrumRecord] = field(default_factory=dict)
    fits: Dict[Channel, FitResult] = field(default_factory=dict)
    bootstraps: Dict[Channel, BootstrapResult] = field(default_factory=dict)
    excursions: int = 0


@dataclass
class CellFailure:
    key: CellKey
    stage: str
    error: str
    channel: Optional[Channel] = None

    def as_dict(self) -> dict:
        return {
            **self.key.as_dict(),
            "stage": self.stage,
            "error": self.error,
            "channel": self.channel.value if self.channel else None,
        }


@dataclass
class DecompositionEntry:
    channel: Channel
    kind: ProbeKind
    probe_power: float
    pump_power: float
    decomposition: NoiseDecomposition

    def as_row(self) -> dict:
        d = self.decomposition
        row = {
            "channel": self.channel.value,
            "kind": self.kind.value,
            "probe_power": self.probe_power,
            "pump_power": self.pump_power,
            "psn": d.psn,
            "psn_floor": d.psn_floor,
            "spn_peak": d.spn_peak,
            "spn_tot": d.spn_tot,
            "mba_tot": d.mba_tot,
            "delta_f_unpol": d.delta_f_unpol,
            "delta_f_pol": d.delta_f_pol,
            "psn_floor_pol": d.psn_floor_pol,
            "flags": ";".join(f.value for f in d.flags),
        }
        for name in (
            "psn_floor",
            "psn_floor_pol",
            "spn_peak",
            "spn_tot",
            "mba_tot",
            "delta_f_unpol",
        ):
            row[f"{name}_sigma"] = d.sigma(name)
        return row


@dataclass
class CampaignReport:
    cells: List[CellResult]
    decompositions: List[DecompositionEntry]
    tables: Dict[str, pd.DataFrame]
    failures: List[CellFailure] = field(default_factory=list)

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame([e.as_row() for e in self.decompositions])

    def to_frames(self) -> Dict[str, pd.DataFrame]:
        frames = dict(self.tables)
        frames["cells"] = self.summary_frame()
        frames["failures"] = pd.DataFrame([f.as_dict() for f in self.failures])
        return frames
