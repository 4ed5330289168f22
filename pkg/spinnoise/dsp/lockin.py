import math
from functools import lru_cache

import numpy as np
from scipy import signal

from spinnoise.errors.exceptions import AliasError, ConfigValidationError
from spinnoise.helpers.constants import LOCKIN_ATTENUATION_DB
from spinnoise.helpers.logger import logger
from spinnoise.interfaces.spectrum import DemodChannels, TimeSeries


@lru_cache(maxsize=16)
def lowpass_taps(
    f_s: float, lp_cutoff: float, decim: int, attenuation_db: float = LOCKIN_ATTENUATION_DB
) -> np.ndarray:
    """
    Linear-phase Kaiser FIR: flat to `lp_cutoff`, `attenuation_db` down from
    f_s_out − lp_cutoff, so nothing aliases into the kept band on decimation.
    """
    f_s_out = f_s / decim
    width = f_s_out - 2 * lp_cutoff
    numtaps, beta = signal.kaiserord(attenuation_db, width / (0.5 * f_s))
    numtaps |= 1  # odd length: integer group delay
    taps = signal.firwin(numtaps, f_s_out / 2, window=("kaiser", beta), fs=f_s)
    taps.setflags(write=False)
    return taps


def lockin_demodulate(
    v: TimeSeries,
    f_ref: float,
    phase_ref: float = 0.0,
    lp_cutoff: float = 80.0,
    decim: int = 1,
    attenuation_db: float = LOCKIN_ATTENUATION_DB,
) -> DemodChannels:
    """
    Mix with 2·exp(−i(2π f_ref t + φ_ref)), low-pass and decimate.

    The in-phase part is the dc channel and the quadrature the rf channel; a
    tone A·cos(2π f_ref t + φ) demodulates to (A cos φ, A sin φ) for φ_ref = 0.
    Only outputs with full filter support are returned.
    """
    f_s = v.f_s
    if not 0 <= f_ref < f_s / 2:
        raise AliasError(
            "reference frequency must lie below the Nyquist frequency",
            f_ref=f_ref,
            f_s=f_s,
        )
    if decim < 1:
        raise ConfigValidationError("decimation factor must be >= 1", key="dsp.decim")
    f_s_out = f_s / decim
    if not 0 < lp_cutoff < f_s_out / 2:
        raise AliasError(
            "lp_cutoff must be below f_s/(2*decim)",
            lp_cutoff=lp_cutoff,
            f_s_out=f_s_out,
        )

    taps = lowpass_taps(float(f_s), float(lp_cutoff), int(decim), float(attenuation_db))
    n_taps = taps.size
    delay = (n_taps - 1) // 2
    n = v.n
    k_lo = math.ceil((n_taps - 1) / decim)
    k_hi = (n - 1) // decim
    if k_hi < k_lo:
        raise ConfigValidationError(
            f"series of {n} samples is shorter than the {n_taps}-tap lock-in filter",
            key="trajectory.duration",
        )

    reference = np.exp(-1j * (2 * math.pi * f_ref * v.t + phase_ref))
    mixed = 2.0 * v.values * reference
    filtered = signal.upfirdn(taps, mixed, up=1, down=decim, axis=-1)
    z = filtered[..., k_lo : k_hi + 1]
    t0 = v.t0 + (k_lo * decim - delay) / f_s

    logger.debug(
        f"lock-in at {f_ref:g} Hz: {n_taps} taps, {n} -> {z.shape[-1]} samples at {f_s_out:g} Hz"
    )
    return DemodChannels(
        dc=TimeSeries(np.ascontiguousarray(z.real), f_s_out, t0),
        rf=TimeSeries(np.ascontiguousarray(z.imag), f_s_out, t0),
        f_s_out=f_s_out,
    )
