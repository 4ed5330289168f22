from dataclasses import replace
from typing import Optional, Union

import numpy as np
from scipy import signal

from spinnoise.errors.exceptions import ConfigValidationError
from spinnoise.interfaces.spectrum import Channel, SpectrumMeta, SpectrumRecord, TimeSeries


def _noverlap(segment_len: int, overlap: float) -> int:
    noverlap = int(round(overlap * segment_len))
    if not 0 <= noverlap < segment_len:
        raise ConfigValidationError("overlap must be in [0, 1)", key="dsp.overlap")
    return noverlap


def count_segments(n: int, segment_len: int, overlap: float) -> int:
    step = segment_len - _noverlap(segment_len, overlap)
    return 0 if n < segment_len else (n - segment_len) // step + 1


def equivalent_segments(
    window: Union[str, tuple], segment_len: int, overlap: float, n_segments: int
) -> float:
    """
    Number of independent periodograms equivalent to `n_segments`
    overlapping windowed segments: K / (1 + 2 Σ_j (1 − j/K) ρ(j)²), with ρ
    the window's normalised overlap correlation at a lag of j segments.
    """
    if n_segments < 1:
        return 0.0
    w = signal.get_window(window, segment_len)
    step = segment_len - _noverlap(segment_len, overlap)
    power = float(np.dot(w, w))
    correction = 0.0
    j = 1
    while j < n_segments and j * step < segment_len:
        lag = j * step
        rho = float(np.dot(w[: segment_len - lag], w[lag:])) / power
        correction += (1 - j / n_segments) * rho**2
        j += 1
    return n_segments / (1 + 2 * correction)


def bin_correlation(window: Union[str, tuple], segment_len: int) -> float:
    """
    Variance inflation 1 + 2 Σ_k ρ_k of a sum over windowed-periodogram
    bins. For white input the bins k apart correlate as
    ρ_k = (|Σ w²·exp(−2πikn/N)| / Σ w²)², which gives about 1.94 for Hann
    and 1 for a rectangular window.
    """
    w2 = signal.get_window(window, segment_len) ** 2
    r = np.abs(np.fft.rfft(w2)) / float(np.sum(w2))
    return float(1.0 + 2.0 * np.sum(r[1:] ** 2))


def welch_psd(
    x: TimeSeries,
    segment_len: int,
    overlap: float = 0.5,
    window: Union[str, tuple] = "hann",
    detrend: Union[bool, str] = False,
    channel: Channel = Channel.DC,
    meta: Optional[SpectrumMeta] = None,
    keep_segments: bool = True,
) -> SpectrumRecord:
    """
    Single-sided, window-power-normalised Welch PSD (units²/Hz).

    A batched series (leading axes) contributes the segments of every row;
    the record's Gamma shape is the summed equivalent segment count.
    """
    n = x.n
    if segment_len < 2 or segment_len > n:
        raise ConfigValidationError(
            f"segment_len {segment_len} must lie in [2, {n}]", key="dsp.segment_len"
        )
    noverlap = _noverlap(segment_len, overlap)
    values = np.asarray(x.values, dtype=float)
    freqs, _, sxx = signal.spectrogram(
        values,
        fs=x.f_s,
        window=window,
        nperseg=segment_len,
        noverlap=noverlap,
        detrend=detrend,
        return_onesided=True,
        scaling="density",
        mode="psd",
        axis=-1,
    )
    # (..., freq, segment) -> (freq, all segments)
    segments = np.moveaxis(sxx, -2, 0).reshape(freqs.size, -1)
    per_series = sxx.shape[-1]
    n_series = segments.shape[1] // per_series
    shape = n_series * equivalent_segments(window, segment_len, overlap, per_series)

    meta = replace(meta) if meta is not None else SpectrumMeta()
    meta.n_segments = int(segments.shape[1])
    meta.shape = float(shape)
    meta.segment_len = int(segment_len)
    meta.window = window if isinstance(window, str) else str(window)
    meta.overlap = float(overlap)
    meta.bin_correlation = bin_correlation(window, segment_len)
    return SpectrumRecord(
        freqs=freqs,
        psd=segments.mean(axis=1),
        mask=np.ones(freqs.size, dtype=bool),
        channel=channel,
        meta=meta,
        segments=segments if keep_segments else None,
    )
