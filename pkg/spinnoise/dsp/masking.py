from typing import Iterable, Tuple

import numpy as np

from spinnoise.interfaces.spectrum import SpectrumRecord


def mask_technical_peaks(
    s: SpectrumRecord, bands: Iterable[Tuple[float, float]]
) -> SpectrumRecord:
    """Exclude every bin inside any (f_lo, f_hi) band; PSD values are untouched."""
    excluded = np.zeros_like(s.mask)
    for f_lo, f_hi in bands:
        lo, hi = min(f_lo, f_hi), max(f_lo, f_hi)
        excluded |= (s.freqs >= lo) & (s.freqs <= hi)
    if not excluded.any():
        return s
    return s.with_mask(s.mask & ~excluded)


def limit_band(s: SpectrumRecord, f_min: float, f_max: float) -> SpectrumRecord:
    """Exclude bins outside [f_min, f_max]."""
    inside = (s.freqs >= f_min) & (s.freqs <= f_max)
    return s.with_mask(s.mask & inside)


def fit_mask(s: SpectrumRecord) -> np.ndarray:
    """Bins a spectral fit may use: unmasked, above 0 Hz and below Nyquist."""
    mask = s.mask & (s.freqs > 0)
    if s.meta.segment_len is None or s.meta.segment_len % 2 == 0:
        mask[-1] = False
    return mask
