import math

import numpy as np

from spinnoise.interfaces.fit import NoiseFitModel


def lorentzian(f, delta_f: float):
    """Unit-peak Lorentzian Δf²/(f² + Δf²)."""
    if not delta_f > 0:
        raise ValueError("delta_f must be positive")
    f = np.asarray(f, dtype=float)
    d2 = delta_f * delta_f
    out = d2 / (f * f + d2)
    return float(out) if out.ndim == 0 else out


def lorentzian_dwidth(f, delta_f: float) -> np.ndarray:
    """∂L/∂Δf = 2Δf·f²/(f² + Δf²)²."""
    f2 = np.asarray(f, dtype=float) ** 2
    return 2 * delta_f * f2 / (f2 + delta_f**2) ** 2


def total_power(s_atomic: float, delta_f: float) -> float:
    """Integral of S·L(f; Δf) over f ≥ 0: S·Δf·π/2."""
    return s_atomic * delta_f * math.pi / 2


def crossover_frequency(model: NoiseFitModel) -> float:
    """
    Frequency where the atomic Lorentzian drops to the flat floor; below it
    the spectrum is atomic-noise limited. Zero when the peak never exceeds
    the floor.
    """
    floor = model.psn_floor
    if floor <= 0:
        return float("inf")
    ratio = model.s_atomic / floor
    if ratio <= 1:
        return 0.0
    return model.delta_f * math.sqrt(ratio - 1)
