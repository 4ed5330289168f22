import math
from typing import Dict, Optional, Tuple

import numpy as np

from spinnoise.helpers.logger import logger
from spinnoise.helpers.seed_helper import SeedHelper, SeedLike
from spinnoise.interfaces.fit import (
    BootstrapResult,
    FitFlag,
    FitResult,
    Interval,
    MbaEstimate,
    NoiseDecomposition,
)
from spinnoise.interfaces.spectrum import SpectrumRecord
from spinnoise.fitting.bootstrap import PERCENTILES, bootstrap_fit
from spinnoise.fitting.lorentzian import total_power


def extract_spn(unpol_fit: FitResult, xi2: float) -> Tuple[float, float]:
    """
    SPN total power and linewidth from an unpolarized-ensemble fit. The flat
    xi2·S_psn floor is carried separately, so the Lorentzian is pure SPN.
    """
    if not math.isclose(unpol_fit.model.xi2, xi2, rel_tol=1e-9):
        logger.warning(
            f"xi2={xi2} differs from the value fixed in the fit ({unpol_fit.model.xi2})"
        )
    m = unpol_fit.model
    return total_power(m.s_atomic, m.delta_f), m.delta_f


def extract_mba(pol_fit: FitResult, spn_tot_from_unpol: float, xibar2: float) -> MbaEstimate:
    """
    MBA total power: polarized Lorentzian total minus the matching
    unpolarized SPN total. Negative results are flagged, not clamped.
    """
    m = pol_fit.model
    mba_tot = total_power(m.s_atomic, m.delta_f) - spn_tot_from_unpol
    flags = list(pol_fit.flags)
    if mba_tot < 0:
        flags.append(FitFlag.NEGATIVE_ESTIMATE)
    return MbaEstimate(mba_tot=mba_tot, mba_intrinsic=mba_tot / xibar2, flags=flags)


def _interval(values: np.ndarray, center: float, fallback_se: float) -> Interval:
    """16/50/84 percentiles of the finite values; ±1σ around `center` if they collapse."""
    values = values[np.isfinite(values)]
    if values.size:
        lo, mid, hi = (float(v) for v in np.percentile(values, PERCENTILES))
        if hi > lo:
            return lo, mid, hi
    se = fallback_se if np.isfinite(fallback_se) else 0.0
    return center - se, center, center + se


def decompose_bootstraps(
    unpol: BootstrapResult,
    xi2: float,
    pol: Optional[BootstrapResult] = None,
    xibar2: float = 1.0,
) -> NoiseDecomposition:
    """
    Combine an unpolarized and (optionally) a polarized bootstrap into the
    PSN / SPN / MBA split. MBA intervals pair replica i of both runs and
    are at least as wide as the two spreads in quadrature.
    """
    u = unpol.point
    spn_tot, delta_f_unpol = extract_spn(u, xi2)
    se = u.stderr()
    ci: Dict[str, Interval] = {
        "psn": _interval(unpol.replica_values("s_psn"), u.model.s_psn, se["s_psn"]),
        "psn_floor": _interval(
            unpol.replica_values("psn_floor"), u.psn_floor, xi2 * se["s_psn"]
        ),
        "spn_peak": _interval(
            unpol.replica_values("s_atomic"), u.model.s_atomic, se["s_atomic"]
        ),
        "spn_tot": _interval(
            unpol.replica_values("total"), spn_tot, u.total_power_stderr()
        ),
        "delta_f_unpol": _interval(
            unpol.replica_values("delta_f"), delta_f_unpol, se["delta_f"]
        ),
    }
    flags = list(u.flags)
    mba_tot = 0.0
    delta_f_pol = None
    psn_floor_pol = None
    if pol is not None:
        p = pol.point
        mba = extract_mba(p, spn_tot, xibar2)
        mba_tot = mba.mba_tot
        delta_f_pol = p.model.delta_f
        psn_floor_pol = p.psn_floor
        ci["psn_floor_pol"] = _interval(
            pol.replica_values("psn_floor"), psn_floor_pol, xi2 * p.stderr()["s_psn"]
        )
        n = min(unpol.n_boot, pol.n_boot)
        paired = pol.replica_values("total")[:n] - unpol.replica_values("total")[:n]
        fallback = math.hypot(p.total_power_stderr(), u.total_power_stderr())
        lo, mid, hi = _interval(paired, mba_tot, fallback)
        # The two runs are independent: the interval is never narrower than
        # their spreads added in quadrature
        spread = math.hypot(pol.halfwidth("total"), unpol.halfwidth("total"))
        if 0.5 * (hi - lo) < spread:
            lo, hi = mid - spread, mid + spread
        ci["mba_tot"] = (lo, mid, hi)
        ci["delta_f_pol"] = _interval(
            pol.replica_values("delta_f"), delta_f_pol, p.stderr()["delta_f"]
        )
        flags.extend(f for f in mba.flags if f not in flags)
    return NoiseDecomposition(
        psn=u.model.s_psn,
        psn_floor=u.psn_floor,
        spn_peak=u.model.s_atomic,
        spn_tot=spn_tot,
        mba_tot=mba_tot,
        delta_f_unpol=delta_f_unpol,
        delta_f_pol=delta_f_pol,
        ci68=ci,
        psn_floor_pol=psn_floor_pol,
        flags=flags,
        unpol_fit=u,
        pol_fit=pol.point if pol is not None else None,
    )


def decompose(
    unpol: SpectrumRecord,
    xi2: float,
    pol: Optional[SpectrumRecord] = None,
    xibar2: float = 1.0,
    n_boot: int = 200,
    method: str = "parametric",
    seed: SeedLike = None,
    jobs: int = 1,
    **fit_kwargs,
) -> NoiseDecomposition:
    """Fit, bootstrap and decompose a matching unpolarized/polarized pair."""
    seed_unpol, seed_pol = SeedHelper.sequence(seed).spawn(2)
    b_unpol = bootstrap_fit(unpol, xi2, n_boot, method, seed_unpol, jobs, **fit_kwargs)
    b_pol = None
    if pol is not None:
        b_pol = bootstrap_fit(pol, xi2, n_boot, method, seed_pol, jobs, **fit_kwargs)
    return decompose_bootstraps(b_unpol, xi2, b_pol, xibar2)
