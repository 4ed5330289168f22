from .lockin import lockin_demodulate, lowpass_taps
from .masking import fit_mask, limit_band, mask_technical_peaks
from .welch import count_segments, equivalent_segments, welch_psd

__all__ = [
    "count_segments",
    "equivalent_segments",
    "fit_mask",
    "limit_band",
    "lockin_demodulate",
    "lowpass_taps",
    "mask_technical_peaks",
    "welch_psd",
]
