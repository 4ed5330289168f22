import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit

from spinnoise.errors.exceptions import (
    InsufficientPointsError,
    NonPositiveError,
    SingularFitError,
    UndefinedRatioError,
)
from spinnoise.interfaces.scaling import (
    ConstantFit,
    ExponentEstimate,
    ScalingFit,
    ScalingPoint,
)

DB_PER_LN = 10 / math.log(10)


def _as_arrays(points: Iterable[Sequence[float]]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    pts = [ScalingPoint(*p) for p in points]
    p = np.array([pt.p for pt in pts], dtype=float)
    y = np.array([pt.y for pt in pts], dtype=float)
    sigma = np.array([pt.sigma for pt in pts], dtype=float)
    if np.any(~(sigma > 0)):
        raise ValueError("every sigma_y must be positive")
    return p, y, sigma


def _weighted_linear(design: np.ndarray, y: np.ndarray, sigma: np.ndarray):
    """Weighted least squares with absolute sigma: (coef, cov, chi2)."""
    a = design / sigma[:, None]
    b = y / sigma
    if np.linalg.matrix_rank(a) < design.shape[1]:
        raise SingularFitError()
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    cov = np.linalg.inv(a.T @ a)
    chi2 = float(np.sum((b - a @ coef) ** 2))
    return coef, cov, chi2


def fit_power_law(points: Iterable[Sequence[float]], n: float) -> ScalingFit:
    """Weighted least squares for y = a0 + a_n·Pⁿ."""
    p, y, sigma = _as_arrays(points)
    if p.size < 3:
        raise InsufficientPointsError(required=3, got=int(p.size))
    if np.ptp(p) == 0:
        raise SingularFitError(powers=p.tolist())
    design = np.column_stack([np.ones_like(p), p**n])
    coef, cov, chi2 = _weighted_linear(design, y, sigma)
    return ScalingFit(
        exponent_n=n,
        a_n=float(coef[1]),
        a0=float(coef[0]),
        stderr_a_n=float(math.sqrt(cov[1, 1])),
        stderr_a0=float(math.sqrt(cov[0, 0])),
        chi2=chi2,
        dof=int(p.size - 2),
    )


def fit_constant(points: Iterable[Sequence[float]]) -> ConstantFit:
    """Inverse-variance weighted mean with its χ² against a constant."""
    p, y, sigma = _as_arrays(points)
    if p.size < 1:
        raise InsufficientPointsError(required=1, got=0)
    w = 1 / sigma**2
    value = float(np.sum(w * y) / np.sum(w))
    return ConstantFit(
        value=value,
        stderr=float(1 / math.sqrt(np.sum(w))),
        chi2=float(np.sum(w * (y - value) ** 2)),
        dof=int(p.size - 1),
    )


def _power_model(p, a0, c, n):
    return a0 + c * np.power(p, n)


def _direct_exponent_fit(p, y, sigma) -> Tuple[np.ndarray, np.ndarray]:
    """a0 + c·Pⁿ by non-linear least squares, started from a profile scan over n."""
    best = None
    for n in np.linspace(0.25, 5.0, 96):
        design = np.column_stack([np.ones_like(p), p**n])
        try:
            coef, _, chi2 = _weighted_linear(design, y, sigma)
        except SingularFitError:
            continue
        if best is None or chi2 < best[0]:
            best = (chi2, coef[0], coef[1], n)
    if best is None:
        raise SingularFitError(powers=p.tolist())
    _, a0, c, n = best
    popt, pcov = curve_fit(
        _power_model,
        p,
        y,
        p0=[a0, c, n],
        sigma=sigma,
        absolute_sigma=True,
        maxfev=20000,
    )
    return popt, pcov


def fit_free_exponent(
    points: Iterable[Sequence[float]], a0: Optional[float] = None
) -> ExponentEstimate:
    """
    Free scaling exponent. The offset a0 (estimated by a direct
    a0 + c·Pⁿ fit unless given) is removed and the slope of
    log(y − a0) vs log P is fitted by weighted least squares.

    Raises NonPositiveError when y − a0 is not positive everywhere.
    """
    p, y, sigma = _as_arrays(points)
    if p.size < 4:
        raise InsufficientPointsError(required=4, got=int(p.size))
    if np.any(p <= 0):
        raise NonPositiveError("powers must be positive for a log-log slope")
    popt, pcov = _direct_exponent_fit(p, y, sigma)
    offset = float(popt[0]) if a0 is None else float(a0)
    residual = y - offset
    if np.any(residual <= 0):
        raise NonPositiveError(a0=offset, min_residual=float(residual.min()))
    log_sigma = sigma / residual
    design = np.column_stack([np.ones_like(p), np.log(p)])
    coef, cov, _ = _weighted_linear(design, np.log(residual), log_sigma)
    return ExponentEstimate(
        slope=float(coef[1]),
        slope_stderr=float(math.sqrt(cov[1, 1])),
        a0=offset,
        nonlinear_n=float(popt[2]),
        nonlinear_n_stderr=float(math.sqrt(max(pcov[2, 2], 0.0))),
    )


def estimate_exponent(points: List[Sequence[float]]) -> ExponentEstimate:
    """fit_free_exponent, falling back to the direct-fit exponent on NonPositive."""
    try:
        return fit_free_exponent(points)
    except NonPositiveError:
        p, y, sigma = _as_arrays(points)
        popt, pcov = _direct_exponent_fit(p, y, sigma)
        n_se = float(math.sqrt(max(pcov[2, 2], 0.0)))
        return ExponentEstimate(
            slope=float("nan"),
            slope_stderr=float("nan"),
            a0=float(popt[0]),
            nonlinear_n=float(popt[2]),
            nonlinear_n_stderr=n_se,
            slope_defined=False,
        )


def db_ratio(a_state: float, a_coherent: float) -> float:
    """10·log10(a_state / a_coherent)."""
    if not (a_state > 0 and a_coherent > 0):
        raise UndefinedRatioError(a_state, a_coherent)
    return 10 * math.log10(a_state / a_coherent)


def db_ratio_stderr(
    a_state: float, stderr_state: float, a_coherent: float, stderr_coherent: float
) -> float:
    """First-order error of db_ratio from both coefficients."""
    if not (a_state > 0 and a_coherent > 0):
        raise UndefinedRatioError(a_state, a_coherent)
    return DB_PER_LN * math.hypot(stderr_state / a_state, stderr_coherent / a_coherent)


def with_coherent_reference(fit: ScalingFit, reference: Optional[ScalingFit]) -> ScalingFit:
    """Attach the dB ratio of `fit.a_n` to the coherent coefficient, if defined."""
    if reference is None:
        return fit.with_db(None, None)
    try:
        db = db_ratio(fit.a_n, reference.a_n)
        err = db_ratio_stderr(fit.a_n, fit.stderr_a_n, reference.a_n, reference.stderr_a_n)
    except UndefinedRatioError:
        return fit.with_db(None, None)
    return fit.with_db(db, err)
