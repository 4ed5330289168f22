import math

import numpy as np

from spinnoise.interfaces.physics import DriveConfig, PumpWaveform

# Fraction of each pump period during which a pulse is on.
PULSE_DUTY = 0.2


def pump_waveform(t: np.ndarray, drive: DriveConfig) -> np.ndarray:
    """Unit-peak pump shape at times `t` (s)."""
    t = np.asarray(t, dtype=float)
    phase = drive.omega_pump * t + drive.pump_phase
    if drive.pump_waveform == PumpWaveform.CONSTANT:
        return np.ones_like(t)
    if drive.pump_waveform == PumpWaveform.SINE:
        return 0.5 * (1.0 + np.cos(phase))
    # raised-cosine pulse at the start of every period
    u = np.mod(phase, 2 * math.pi) / (2 * math.pi)
    return np.where(u < PULSE_DUTY, 0.5 * (1.0 - np.cos(2 * math.pi * u / PULSE_DUTY)), 0.0)


def waveform_mean(waveform: PumpWaveform) -> float:
    if waveform == PumpWaveform.CONSTANT:
        return 1.0
    if waveform == PumpWaveform.SINE:
        return 0.5
    return 0.5 * PULSE_DUTY


def pump_rate(t: np.ndarray, drive: DriveConfig) -> np.ndarray:
    """R_OP(t) in s⁻¹; identically zero for an unpolarized ensemble."""
    if not drive.polarized:
        return np.zeros_like(np.asarray(t, dtype=float))
    return drive.peak_pump_rate * pump_waveform(t, drive)


def mean_pump_rate(drive: DriveConfig) -> float:
    return drive.peak_pump_rate * waveform_mean(drive.pump_waveform)
