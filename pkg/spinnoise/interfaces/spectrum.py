from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional

import numpy as np

from spinnoise.errors.exceptions import SpectrumValidationError


class Channel(Enum):
    """Lock-in quadratures: in-phase is the dc band, quadrature the rf band."""

    DC = "dc"
    RF = "rf"


@dataclass
class TimeSeries:
    """Uniformly sampled real series; `values` may carry leading batch axes."""

    values: np.ndarray
    f_s: float
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.f_s <= 0:
            raise SpectrumValidationError("sample rate must be positive", {"f_s": self.f_s})

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(self.n) / self.f_s

    def drop(self, duration: float) -> "TimeSeries":
        """Discard the first `duration` seconds."""
        k = int(round(duration * self.f_s))
        return TimeSeries(self.values[..., k:], self.f_s, self.t0 + k / self.f_s)


@dataclass
class DemodChannels:
    dc: TimeSeries
    rf: TimeSeries
    f_s_out: float

    def channel(self, channel: Channel) -> TimeSeries:
        return self.dc if channel == Channel.DC else self.rf


@dataclass
class SpectrumMeta:
    """Provenance carried alongside every spectrum."""

    probe_power: Optional[float] = None
    pump_power: Optional[float] = None
    probe_kind: Optional[str] = None
    polarized: Optional[bool] = None
    seed: Optional[int] = None
    n_segments: int = 1
    # Gamma shape of each averaged bin (effective independent segments)
    shape: Optional[float] = None
    segment_len: Optional[int] = None
    window: Optional[str] = None
    overlap: Optional[float] = None
    # Variance inflation of band-smooth estimates from neighbouring-bin
    # correlation of the windowed periodogram; 1 for independent bins
    bin_correlation: float = 1.0


@dataclass
class SpectrumRecord:
    """
    Single-sided PSD on a uniform frequency grid. `mask` is True for bins that
    enter fits; `segments` keeps the per-segment periodograms (freq, segment)
    when the spectrum was estimated in-process.
    """

    freqs: np.ndarray
    psd: np.ndarray
    mask: np.ndarray
    channel: Channel = Channel.DC
    meta: SpectrumMeta = field(default_factory=SpectrumMeta)
    segments: Optional[np.ndarray] = None

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if not (self.freqs.shape == self.psd.shape == self.mask.shape):
            raise SpectrumValidationError(
                "freqs, psd and mask must have equal length",
                {"freqs": self.freqs.shape, "psd": self.psd.shape},
            )
        if np.any(self.psd < 0):
            raise SpectrumValidationError("PSD must be non-negative")

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0]) if self.freqs.size > 1 else 0.0

    @property
    def n_segments(self) -> int:
        return self.meta.n_segments

    @property
    def shape(self) -> float:
        return float(self.meta.shape if self.meta.shape is not None else self.meta.n_segments)

    @property
    def bin_correlation(self) -> float:
        return float(self.meta.bin_correlation)

    @property
    def n_used(self) -> int:
        return int(np.count_nonzero(self.mask))

    def with_mask(self, mask: np.ndarray) -> "SpectrumRecord":
        return replace(self, mask=np.asarray(mask, dtype=bool))

    def with_psd(self, psd: np.ndarray, shape: Optional[float] = None) -> "SpectrumRecord":
        meta = self.meta if shape is None else replace(self.meta, shape=shape)
        return replace(self, psd=np.asarray(psd, dtype=float), meta=meta, segments=None)

    def variance(self) -> float:
        """Integrated power Σ psd·Δf over unmasked bins."""
        return float(np.sum(self.psd[self.mask]) * self.df)

    @staticmethod
    def average(records: List["SpectrumRecord"]) -> "SpectrumRecord":
        """
        Merge replicate spectra on the same grid. Segment counts and Gamma
        shapes add; the PSD is the segment-weighted mean.
        """
        if not records:
            raise SpectrumValidationError("nothing to average")
        first = records[0]
        if len(records) == 1:
            return first
        for r in records[1:]:
            if r.freqs.shape != first.freqs.shape or not np.array_equal(r.freqs, first.freqs):
                raise SpectrumValidationError("cannot average spectra on different grids")
        weights = np.array([r.n_segments for r in records], dtype=float)
        psd = np.average(np.stack([r.psd for r in records]), axis=0, weights=weights)
        mask = np.logical_and.reduce([r.mask for r in records])
        segments = None
        if all(r.segments is not None for r in records):
            segments = np.concatenate([r.segments for r in records], axis=-1)
        meta = replace(
            first.meta,
            n_segments=int(weights.sum()),
            shape=float(sum(r.shape for r in records)),
            seed=first.meta.seed,
        )
        return SpectrumRecord(first.freqs, psd, mask, first.channel, meta, segments)
