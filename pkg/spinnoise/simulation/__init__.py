from .bloch import BlochIntegrator, larmor_frequency, step
from .pump import mean_pump_rate, pump_rate, pump_waveform
from .trajectory import simulate_trajectory

__all__ = [
    "BlochIntegrator",
    "larmor_frequency",
    "mean_pump_rate",
    "pump_rate",
    "pump_waveform",
    "simulate_trajectory",
    "step",
]
