import math
from typing import Optional, Tuple

import numpy as np
from scipy import optimize, stats
from scipy.ndimage import median_filter
from scipy.special import gammaln

from spinnoise.dsp.masking import fit_mask
from spinnoise.errors.exceptions import NonConvergenceError, SpectrumValidationError
from spinnoise.helpers.constants import MIN_FIT_BINS, MIN_FIT_SEGMENTS
from spinnoise.helpers.logger import logger
from spinnoise.helpers.seed_helper import SeedHelper, SeedLike
from spinnoise.interfaces.fit import FitFlag, FitResult, NoiseFitModel
from spinnoise.interfaces.spectrum import SpectrumMeta, SpectrumRecord
from spinnoise.fitting.lorentzian import lorentzian, lorentzian_dwidth
from spinnoise.constants.messages import SpinNoiseMessages


def _model_terms(f: np.ndarray, theta: np.ndarray, xi2: float):
    """Model PSD and its Jacobian (n, 3) with respect to (S_psn, S_atomic, Δf)."""
    a, b, d = theta
    L = lorentzian(f, d)
    m = xi2 * a + b * L
    jac = np.empty((f.size, 3))
    jac[:, 0] = xi2
    jac[:, 1] = L
    jac[:, 2] = b * lorentzian_dwidth(f, d)
    return m, jac


def _is_stationary(x: np.ndarray, grad: np.ndarray, bounds, gtol: float = 1e-6) -> bool:
    """Projected-gradient test for an L-BFGS-B stop on a failed line search."""
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        return False
    lo = np.array([b[0] if b[0] is not None else -np.inf for b in bounds])
    hi = np.array([b[1] if b[1] is not None else np.inf for b in bounds])
    projected = grad.copy()
    projected[np.isclose(x, lo) & (grad > 0)] = 0.0
    projected[np.isclose(x, hi) & (grad < 0)] = 0.0
    return float(np.max(np.abs(projected))) <= gtol


def whittle_loglik(y: np.ndarray, m: np.ndarray, shape: float) -> float:
    """Log-likelihood of averaged periodogram bins, each Gamma(shape, mean m)."""
    return float(
        np.sum(
            shape * np.log(shape)
            - gammaln(shape)
            + (shape - 1) * np.log(y)
            - shape * np.log(m)
            - shape * y / m
        )
    )


def initial_guess(f: np.ndarray, y: np.ndarray, xi2: float = 1.0) -> NoiseFitModel:
    """
    Floor from the median of the top frequency quartile, peak excess from
    the lowest bins, width where the smoothed excess halves.
    """
    floor = float(np.median(y[f >= np.quantile(f, 0.75)]))
    df = float(np.min(np.diff(f))) if f.size > 1 else 1.0
    smooth = median_filter(y, size=5, mode="nearest")
    excess = smooth - floor
    peak = float(np.mean(y[:3])) - floor
    if peak <= 0.05 * floor:
        return NoiseFitModel(floor / xi2, 0.1 * floor, 10 * df, xi2)
    below = np.nonzero(excess <= peak / 2)[0]
    delta_f = float(f[below[0]]) if below.size else float(f[-1])
    return NoiseFitModel(floor / xi2, peak, max(delta_f, df), xi2)


def _flat_fit(f, y, shape, xi2, df, n_used, lr, bin_correlation: float = 1.0) -> FitResult:
    level = float(np.mean(y))
    m = np.full_like(y, level)
    cov = np.zeros((3, 3))
    cov[0, 0] = bin_correlation * level**2 / (shape * n_used) / xi2**2
    logger.debug(f"flat spectrum (likelihood ratio {lr:.3g}); returning floor-only fit")
    return FitResult(
        model=NoiseFitModel(level / xi2, 0.0, df, xi2),
        loglik=whittle_loglik(y, m, shape),
        n_used=n_used,
        cov=cov,
        flags=[FitFlag.DEGENERATE_SPECTRUM],
        reduced_chi2=float(np.sum(shape * (y - m) ** 2 / m**2) / max(n_used - 1, 1)),
    )


def fit_noise_spectrum(
    s: SpectrumRecord,
    xi2: float = 1.0,
    init: Optional[NoiseFitModel] = None,
    max_iter: int = 500,
    degenerate_pvalue: float = 1e-3,
) -> FitResult:
    """
    Maximum-Whittle-likelihood fit of xi2·S_psn + S_atomic·L(f; Δf) with
    xi2 held fixed. Bin 0, the Nyquist bin and masked bins are excluded.

    A spectrum whose Lorentzian is not significant at `degenerate_pvalue`
    (likelihood-ratio test against a flat level) returns the flat fit with
    S_atomic = 0 and the DEGENERATE_SPECTRUM flag.
    """
    mask = fit_mask(s)
    n_used = int(np.count_nonzero(mask))
    if n_used == 0:
        raise SpectrumValidationError(SpinNoiseMessages.ALL_BINS_MASKED)
    if n_used < MIN_FIT_BINS:
        raise SpectrumValidationError(
            f"fit needs at least {MIN_FIT_BINS} unmasked bins", {"n_used": n_used}
        )
    if s.n_segments < MIN_FIT_SEGMENTS:
        raise SpectrumValidationError(
            f"fit needs at least {MIN_FIT_SEGMENTS} averaged segments",
            {"n_segments": s.n_segments},
        )
    f = s.freqs[mask]
    y = s.psd[mask]
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise SpectrumValidationError("fitted bins must be positive and finite")
    shape = s.shape
    corr = s.bin_correlation
    df = s.df

    start = init if init is not None else initial_guess(f, y, xi2)
    scale = np.array(
        [
            max(start.s_psn, 1e-12 * float(np.mean(y)) / xi2),
            max(start.s_atomic, 0.1 * start.psn_floor, 1e-12),
            start.delta_f,
        ]
    )
    bounds = [
        (1e-9, None),
        (0.0, None),
        (0.01 * df / scale[2], 100 * float(f.max()) / scale[2]),
    ]

    def objective(x):
        theta = x * scale
        m, jac = _model_terms(f, theta, xi2)
        r = y / m
        value = float(np.mean(np.log(m) + r))
        w = (1.0 - r) / m / f.size
        return value, (w @ jac) * scale

    x0 = np.clip(np.ones(3), [b[0] for b in bounds], [b[1] or np.inf for b in bounds])
    n_iter = 0
    for _ in range(2):  # restart once from the optimum to polish
        res = optimize.minimize(
            objective,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-12},
        )
        n_iter += int(res.nit)
        if (
            res.status == 1
            or (res.status == 2 and not _is_stationary(res.x, res.jac, bounds))
            or not np.all(np.isfinite(res.x))
            or not np.isfinite(res.fun)
        ):
            raise NonConvergenceError(iterations=n_iter, optimizer=str(res.message))
        x0 = res.x
    theta = res.x * scale
    m, jac = _model_terms(f, theta, xi2)

    nll_full = shape * float(np.sum(np.log(m) + y / m))
    level = float(np.mean(y))
    nll_flat = shape * float(np.sum(np.log(level) + y / level))
    # Correlated neighbouring bins inflate the likelihood ratio by `corr`
    lr = 2.0 * (nll_flat - nll_full) / corr
    if theta[1] <= 0 or lr < stats.chi2.isf(degenerate_pvalue, df=2):
        return _flat_fit(f, y, shape, xi2, df, n_used, lr, corr)

    flags = []
    d_lo, d_hi = bounds[2][0] * scale[2], bounds[2][1] * scale[2]
    if math.isclose(theta[2], d_lo, rel_tol=1e-6) or math.isclose(theta[2], d_hi, rel_tol=1e-6):
        flags.append(FitFlag.BOUND_EXCURSION)
        logger.warning(f"linewidth fit at its bound: {theta[2]:.4g} Hz")

    fisher = (shape / corr) * (jac.T / m**2) @ jac
    cov = np.linalg.pinv(fisher, hermitian=True)
    cov = 0.5 * (cov + cov.T)
    model = NoiseFitModel(float(theta[0]), float(theta[1]), float(theta[2]), xi2)
    return FitResult(
        model=model,
        loglik=whittle_loglik(y, m, shape),
        n_used=n_used,
        cov=cov,
        flags=flags,
        reduced_chi2=float(np.sum(shape * (y - m) ** 2 / m**2) / max(n_used - 3, 1)),
        n_iter=n_iter,
    )


def synthetic_spectrum(
    model: NoiseFitModel,
    freqs: np.ndarray,
    n_segments: int,
    seed: SeedLike = None,
    expected: bool = False,
) -> SpectrumRecord:
    """
    Averaged periodogram drawn from the model: each bin Gamma-distributed
    with shape `n_segments` and mean model.psd(f). `expected=True` returns
    the noise-free mean spectrum.
    """
    freqs = np.asarray(freqs, dtype=float)
    mean = model.psd(freqs)
    if expected:
        psd = mean
    else:
        rng = SeedHelper.generator(seed)
        psd = mean * rng.gamma(n_segments, 1.0 / n_segments, size=freqs.size)
    return SpectrumRecord(
        freqs=freqs,
        psd=psd,
        mask=np.ones(freqs.size, dtype=bool),
        meta=SpectrumMeta(n_segments=n_segments, shape=float(n_segments)),
    )


def spectrum_residuals(s: SpectrumRecord, fit: FitResult) -> Tuple[np.ndarray, np.ndarray]:
    """Normalised residuals √shape·(y − m)/m over the fitted bins."""
    mask = fit_mask(s)
    m = fit.model.psd(s.freqs[mask])
    return s.freqs[mask], math.sqrt(s.shape) * (s.psd[mask] - m) / m
