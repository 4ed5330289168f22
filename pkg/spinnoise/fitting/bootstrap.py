import traceback
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, List, Optional

import numpy as np

from spinnoise.errors.exceptions import BootstrapError, ConfigValidationError
from spinnoise.helpers.constants import (
    MAX_FAILED_BOOTSTRAP_FRACTION,
    MIN_RECOMMENDED_BOOTSTRAP,
)
from spinnoise.helpers.logger import logger
from spinnoise.helpers.seed_helper import SeedHelper, SeedLike
from spinnoise.interfaces.fit import (
    BootstrapResult,
    FitResult,
    Interval,
    replica_quantity,
)
from spinnoise.interfaces.spectrum import SpectrumRecord
from spinnoise.fitting.whittle import fit_noise_spectrum

BOOTSTRAP_QUANTITIES = ("s_psn", "s_atomic", "delta_f", "psn_floor", "total")
PERCENTILES = (16.0, 50.0, 84.0)


def _resample(
    s: SpectrumRecord, point: FitResult, method: str, rng: np.random.Generator
) -> SpectrumRecord:
    if method == "segments":
        n_seg = s.segments.shape[1]
        cols = rng.integers(0, n_seg, size=n_seg)
        return s.with_psd(s.segments[:, cols].mean(axis=1))
    # Independent bins with the effective shape of the correlated original
    mean = point.model.psd(s.freqs)
    shape = s.shape / s.bin_correlation
    return s.with_psd(mean * rng.gamma(shape, 1.0 / shape, size=s.freqs.size))


def percentile_intervals(
    replicas: List[Optional[FitResult]], names=BOOTSTRAP_QUANTITIES
) -> Dict[str, Interval]:
    ok = [r for r in replicas if r is not None]
    out = {}
    for name in names:
        values = np.array([replica_quantity(r, name) for r in ok])
        p16, p50, p84 = np.percentile(values, PERCENTILES)
        out[name] = (float(p16), float(p50), float(p84))
    return out


def bootstrap_fit(
    s: SpectrumRecord,
    xi2: float = 1.0,
    n_boot: int = 200,
    method: str = "parametric",
    seed: SeedLike = None,
    jobs: int = 1,
    point: Optional[FitResult] = None,
    max_failed_fraction: float = MAX_FAILED_BOOTSTRAP_FRACTION,
    **fit_kwargs,
) -> BootstrapResult:
    """
    Refit `n_boot` resampled spectra and report 16/50/84 percentiles.

    `parametric` redraws every bin from the fitted Gamma model; `segments`
    resamples the retained Welch segments with replacement. Replicas use
    independent child seeds and are merged by replica index, so the result
    does not depend on `jobs`.
    """
    if n_boot < 1:
        raise ConfigValidationError("n_boot must be >= 1", key="fit.n_boot")
    if method not in ("parametric", "segments"):
        raise ConfigValidationError(
            f"unknown bootstrap method '{method}'", key="fit.bootstrap_method"
        )
    if method == "segments" and s.segments is None:
        raise ConfigValidationError(
            "segment bootstrap needs retained Welch segments", key="fit.bootstrap_method"
        )
    if n_boot < MIN_RECOMMENDED_BOOTSTRAP:
        logger.warning(
            f"n_boot={n_boot} is below {MIN_RECOMMENDED_BOOTSTRAP}; intervals will be coarse"
        )

    # A caller-supplied start seeds the point fit; replicas start from its optimum
    init = fit_kwargs.pop("init", None)
    if point is None:
        point = fit_noise_spectrum(s, xi2, init=init, **fit_kwargs)
    replica_init = init if point.degenerate else point.model
    children = SeedHelper.sequence(seed).spawn(n_boot)

    def replica(index: int) -> FitResult:
        rng = np.random.default_rng(children[index])
        resampled = _resample(s, point, method, rng)
        return fit_noise_spectrum(resampled, xi2, init=replica_init, **fit_kwargs)

    results: List[Optional[FitResult]] = [None] * n_boot
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        # Submit all replicas and remember their original index
        future_to_index = {executor.submit(replica, i): i for i in range(n_boot)}
        for future in as_completed(future_to_index):
            index = future_to_index[future]
            try:
                results[index] = future.result()
            except Exception as e:
                logger.debug(f"bootstrap replica {index} failed: {e}")
                logger.debug(traceback.format_exc())
                results[index] = None

    n_failed = sum(r is None for r in results)
    if n_failed > max_failed_fraction * n_boot or n_failed == n_boot:
        raise BootstrapError(n_failed=n_failed, n_boot=n_boot)
    if n_failed:
        logger.warning(f"{n_failed}/{n_boot} bootstrap replicas failed and were dropped")

    return BootstrapResult(
        point=point,
        replicas=results,
        percentiles=percentile_intervals(results),
        n_failed=n_failed,
        method=method,
    )
