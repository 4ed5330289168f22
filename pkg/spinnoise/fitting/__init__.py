from .bootstrap import bootstrap_fit
from .decomposition import decompose, decompose_bootstraps, extract_mba, extract_spn
from .lorentzian import crossover_frequency, lorentzian, total_power
from .whittle import fit_noise_spectrum, initial_guess, synthetic_spectrum

__all__ = [
    "bootstrap_fit",
    "crossover_frequency",
    "decompose",
    "decompose_bootstraps",
    "extract_mba",
    "extract_spn",
    "fit_noise_spectrum",
    "initial_guess",
    "lorentzian",
    "synthetic_spectrum",
    "total_power",
]
