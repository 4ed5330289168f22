import math
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import integrate, optimize

from spinnoise.errors.exceptions import (
    ConfigValidationError,
    NonConvergenceError,
    SpectrumValidationError,
)
from spinnoise.fitting.bootstrap import bootstrap_fit
from spinnoise.fitting.decomposition import (
    decompose,
    decompose_bootstraps,
    extract_mba,
    extract_spn,
)
from spinnoise.fitting.lorentzian import crossover_frequency, lorentzian, total_power
from spinnoise.fitting.whittle import (
    fit_noise_spectrum,
    initial_guess,
    spectrum_residuals,
    synthetic_spectrum,
)
from spinnoise.interfaces.fit import PARAMETER_NAMES, FitFlag, NoiseFitModel


@pytest.mark.parametrize(
    "f, delta_f, expected",
    [(0.0, 80.0, 1.0), (80.0, 80.0, 0.5), (300.0, 100.0, 0.1)],
)
def test_lorentzian(f, delta_f, expected):
    assert lorentzian(f, delta_f) == pytest.approx(expected)


def test_lorentzian_rejects_zero_width():
    with pytest.raises(ValueError):
        lorentzian(1.0, 0.0)


def test_total_power():
    assert total_power(4.0, 100.0) == pytest.approx(628.3185, rel=1e-6)
    assert total_power(0.0, 100.0) == 0.0
    numeric, _ = integrate.quad(lambda f: 4.0 * lorentzian(f, 100.0), 0, 1e6, limit=500)
    assert total_power(4.0, 100.0) == pytest.approx(numeric, rel=1e-3)


def test_crossover_frequency():
    model = NoiseFitModel(s_psn=1.0, s_atomic=10.0, delta_f=5.0)
    assert crossover_frequency(model) == pytest.approx(15.0)
    assert model.psd(15.0) == pytest.approx(2.0)
    assert crossover_frequency(NoiseFitModel(1.0, 0.5, 5.0)) == 0.0


def test_fit_recovers_synthetic_truth(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=0)
    fit = fit_noise_spectrum(s)
    for name in PARAMETER_NAMES:
        assert getattr(fit.model, name) == pytest.approx(getattr(reference_model, name), rel=0.05)
    assert not fit.flags
    assert fit.n_used == reference_freqs.size - 2
    assert 0.7 < fit.reduced_chi2 < 1.3


def test_fit_of_expected_spectrum_is_exact(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, expected=True)
    fit = fit_noise_spectrum(s)
    assert np.allclose(fit.model.as_array(), reference_model.as_array(), rtol=1e-4)
    _, residuals = spectrum_residuals(s, fit)
    assert np.allclose(residuals, 0.0, atol=1e-3)


def test_fit_with_fixed_xi2_reports_floor(reference_freqs):
    truth = NoiseFitModel(s_psn=4.0, s_atomic=10.0, delta_f=80.0, xi2=0.76)
    s = synthetic_spectrum(truth, reference_freqs, n_segments=200, expected=True)
    fit = fit_noise_spectrum(s, xi2=0.76)
    assert fit.model.s_psn == pytest.approx(4.0, rel=1e-4)
    assert fit.psn_floor == pytest.approx(0.76 * 4.0, rel=1e-4)


def test_flat_spectrum_is_degenerate(reference_freqs):
    flat = NoiseFitModel(s_psn=4.0, s_atomic=0.0, delta_f=80.0)
    s = synthetic_spectrum(flat, reference_freqs, n_segments=200, seed=1)
    fit = fit_noise_spectrum(s)
    assert fit.degenerate
    assert FitFlag.DEGENERATE_SPECTRUM in fit.flags
    assert fit.model.s_atomic == 0.0
    used = s.psd[1:-1]
    assert fit.model.s_psn == pytest.approx(float(np.mean(used)))


def test_initial_guess_is_in_the_right_range(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, expected=True)
    guess = initial_guess(s.freqs[1:], s.psd[1:])
    assert guess.s_psn == pytest.approx(4.0, rel=0.1)
    assert guess.delta_f == pytest.approx(80.0, rel=0.5)


def test_all_masked_spectrum_is_rejected(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=0)
    with pytest.raises(SpectrumValidationError):
        fit_noise_spectrum(s.with_mask(np.zeros(s.freqs.size, dtype=bool)))


def test_too_few_bins_or_segments_are_rejected(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=0)
    narrow = s.with_mask(reference_freqs < 60.0)
    with pytest.raises(SpectrumValidationError):
        fit_noise_spectrum(narrow)
    few = synthetic_spectrum(reference_model, reference_freqs, n_segments=4, seed=0)
    with pytest.raises(SpectrumValidationError):
        fit_noise_spectrum(few)


def test_single_replica_bootstrap_has_degenerate_interval(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=2)
    boot = bootstrap_fit(s, n_boot=1, seed=5)
    assert boot.n_boot == 1
    for lo, mid, hi in boot.percentiles.values():
        assert lo == mid == hi


def test_bootstrap_is_independent_of_jobs(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=3)
    serial = bootstrap_fit(s, n_boot=20, seed=9, jobs=1)
    threaded = bootstrap_fit(s, n_boot=20, seed=9, jobs=4)
    assert serial.percentiles == threaded.percentiles
    assert np.array_equal(serial.replica_values("total"), threaded.replica_values("total"))


def test_bootstrap_interval_shrinks_with_more_segments(reference_model, reference_freqs):
    widths = []
    for n_segments in (100, 200):
        s = synthetic_spectrum(reference_model, reference_freqs, n_segments=n_segments, seed=4)
        widths.append(bootstrap_fit(s, n_boot=200, seed=6).halfwidth("s_atomic"))
    assert widths[1] / widths[0] == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_segment_bootstrap_needs_retained_segments(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=0)
    with pytest.raises(ConfigValidationError):
        bootstrap_fit(s, n_boot=10, method="segments")
    with pytest.raises(ConfigValidationError):
        bootstrap_fit(s, n_boot=10, method="jackknife")


def _expected_fit(model, freqs):
    return fit_noise_spectrum(synthetic_spectrum(model, freqs, n_segments=200, expected=True), model.xi2)


def test_extract_spn(reference_freqs):
    fit = _expected_fit(NoiseFitModel(4.0, 6.74, 20.0), reference_freqs)
    spn_tot, delta_f = extract_spn(fit, 1.0)
    assert fit.model.s_atomic == pytest.approx(6.74, rel=1e-4)
    assert spn_tot == pytest.approx(total_power(6.74, 20.0), rel=1e-4)
    assert delta_f == pytest.approx(20.0, rel=1e-4)

    flat = fit_noise_spectrum(
        synthetic_spectrum(NoiseFitModel(4.0, 0.0, 20.0), reference_freqs, 200, expected=True)
    )
    assert extract_spn(flat, 1.0)[0] == 0.0


def test_extract_mba_subtracts_spin_projection_noise(reference_freqs):
    fit = _expected_fit(NoiseFitModel(4.0, 10.0, 30.0), reference_freqs)
    spn_tot = total_power(10.0, 30.0)
    assert extract_mba(fit, spn_tot, 1.85).mba_tot == pytest.approx(0.0, abs=1e-3 * spn_tot)

    estimate = extract_mba(fit, 2 * spn_tot, 2.0)
    assert estimate.mba_tot == pytest.approx(-spn_tot, rel=1e-4)
    assert estimate.mba_intrinsic == pytest.approx(-spn_tot / 2.0, rel=1e-4)
    assert FitFlag.NEGATIVE_ESTIMATE in estimate.flags


def test_decompose_pairs_unpolarized_and_polarized_runs(reference_freqs):
    unpol = synthetic_spectrum(NoiseFitModel(4.0, 10.0, 20.0), reference_freqs, 200, seed=10)
    pol = synthetic_spectrum(NoiseFitModel(4.0, 30.0, 25.0), reference_freqs, 200, seed=11)
    d = decompose(unpol, 1.0, pol, xibar2=1.0, n_boot=50, seed=12)

    assert d.mba_tot == pytest.approx(total_power(30.0, 25.0) - total_power(10.0, 20.0), rel=0.15)
    assert d.psn_floor_pol == pytest.approx(4.0, rel=0.05)
    lo, _, hi = d.ci68["mba_tot"]
    assert lo < d.mba_tot < hi
    assert d.sigma("mba_tot") > 0
    assert set(d.ci68) >= {"psn", "spn_tot", "mba_tot", "delta_f_pol"}


def test_decompose_without_polarized_run(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, 200, seed=13)
    boot = bootstrap_fit(s, n_boot=30, seed=14)
    d = decompose_bootstraps(boot, 1.0)
    assert d.mba_tot == 0.0
    assert d.pol_fit is None
    assert d.psn_floor_pol is None
    assert math.isnan(d.sigma("mba_tot"))
    assert d.spn_tot == pytest.approx(total_power(10.0, 80.0), rel=0.1)


@pytest.mark.parametrize("xi2", [0.76, 1.3])
def test_fit_is_invariant_to_the_squeezing_normalisation(reference_model, reference_freqs, xi2):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=5)
    base = fit_noise_spectrum(s, 1.0)
    scaled = fit_noise_spectrum(s, xi2)
    assert scaled.psn_floor == pytest.approx(base.psn_floor, rel=1e-4)
    assert scaled.model.s_atomic == pytest.approx(base.model.s_atomic, rel=1e-4)
    assert scaled.model.delta_f == pytest.approx(base.model.delta_f, rel=1e-4)
    assert scaled.model.s_psn == pytest.approx(base.model.s_psn / xi2, rel=1e-4)


def test_correlated_bins_widen_the_fit_covariance(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, expected=True)
    correlated = replace(s, meta=replace(s.meta, bin_correlation=2.0))
    independent_fit = fit_noise_spectrum(s)
    correlated_fit = fit_noise_spectrum(correlated)
    assert correlated_fit.model.s_atomic == pytest.approx(independent_fit.model.s_atomic, rel=1e-6)
    assert np.allclose(correlated_fit.cov, 2.0 * independent_fit.cov, rtol=1e-6)


def _stopped_optimizer(jac):
    def minimize(objective, x0, **kwargs):
        return optimize.OptimizeResult(
            x=np.ones(3),
            fun=1.0,
            jac=np.asarray(jac, dtype=float),
            nit=3,
            status=2,
            message="ABNORMAL_TERMINATION_IN_LNSRCH",
        )

    return minimize


def test_failed_line_search_away_from_optimum_is_non_convergence(
    monkeypatch, reference_model, reference_freqs
):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, expected=True)
    monkeypatch.setattr(
        "spinnoise.fitting.whittle.optimize",
        SimpleNamespace(minimize=_stopped_optimizer([0.5, 0.0, 0.0])),
    )
    with pytest.raises(NonConvergenceError):
        fit_noise_spectrum(s)


def test_failed_line_search_at_a_stationary_point_is_accepted(
    monkeypatch, reference_model, reference_freqs
):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, expected=True)
    monkeypatch.setattr(
        "spinnoise.fitting.whittle.optimize",
        SimpleNamespace(minimize=_stopped_optimizer([0.0, 0.0, 0.0])),
    )
    fit = fit_noise_spectrum(s)
    assert fit.n_iter == 6
    assert np.isfinite(fit.model.s_psn)


def test_bootstrap_accepts_a_starting_model(reference_model, reference_freqs):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=6)
    plain = bootstrap_fit(s, n_boot=5, seed=1)
    seeded = bootstrap_fit(s, n_boot=5, seed=1, init=reference_model)
    assert seeded.n_failed == 0
    assert seeded.point.model.s_atomic == pytest.approx(plain.point.model.s_atomic, rel=1e-3)
    assert seeded.point.model.delta_f == pytest.approx(plain.point.model.delta_f, rel=1e-3)


def test_mba_interval_is_not_narrower_than_independent_spreads(reference_freqs):
    unpol = synthetic_spectrum(NoiseFitModel(4.0, 10.0, 20.0), reference_freqs, 200, seed=20)
    pol = synthetic_spectrum(NoiseFitModel(4.0, 30.0, 25.0), reference_freqs, 200, seed=21)
    # Shared replica seeds make the paired differences strongly correlated
    unpol_boot = bootstrap_fit(unpol, n_boot=40, seed=22)
    pol_boot = bootstrap_fit(pol, n_boot=40, seed=22)
    d = decompose_bootstraps(unpol_boot, 1.0, pol_boot)
    spread = math.hypot(pol_boot.halfwidth("total"), unpol_boot.halfwidth("total"))
    assert d.sigma("mba_tot") >= spread * (1 - 1e-9)
    lo, mid, hi = d.ci68["mba_tot"]
    assert lo < mid < hi
