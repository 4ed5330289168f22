import math

import numpy as np

from spinnoise.errors.exceptions import SmallAngleViolation
from spinnoise.helpers.constants import SMALL_ANGLE_LIMIT
from spinnoise.interfaces.probe import DetectorConfig, StokesSample
from spinnoise.interfaces.spectrum import TimeSeries


def polarimeter_readout(
    f_z: np.ndarray, stokes: StokesSample, det: DetectorConfig
) -> TimeSeries:
    """
    Balanced-polarimeter voltage v = gain·[G_F·F_z·S1 + S2_noise], plus any
    configured technical tones.
    """
    f_z = np.asarray(f_z, dtype=float)
    if f_z.shape != np.shape(stokes.s2_noise):
        raise ValueError(
            f"F_z shape {f_z.shape} does not match S2 noise {np.shape(stokes.s2_noise)}"
        )
    rotation = det.g_f * f_z
    if rotation.size:
        max_rotation = float(np.max(np.abs(rotation)))
        if max_rotation >= SMALL_ANGLE_LIMIT:
            raise SmallAngleViolation(max_rotation)
    v = det.gain * (rotation * stokes.s1 + stokes.s2_noise)
    if det.technical_tones:
        t = stokes.t
        for freq, amplitude in det.technical_tones:
            v = v + amplitude * np.cos(2 * math.pi * freq * t)
    return TimeSeries(values=v, f_s=stokes.f_s, t0=stokes.t0)
