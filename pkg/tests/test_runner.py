import math
from dataclasses import replace

import numpy as np
import pytest

import spinnoise
from spinnoise.fitting.decomposition import extract_spn
from spinnoise.fitting.whittle import fit_noise_spectrum, synthetic_spectrum
from spinnoise.interfaces.campaign import CampaignReport, CellKey
from spinnoise.interfaces.config import RunConfig
from spinnoise.interfaces.fit import NoiseFitModel
from spinnoise.interfaces.probe import ProbeKind
from spinnoise.interfaces.spectrum import Channel
from spinnoise.runner import CampaignRunner, CellRunner
from spinnoise.runner.cell import bootstrap_seed, cell_seed
from spinnoise.runner.selftest import CHECKS, band_mean_stderr


def test_grid_cells_share_unpolarized_runs():
    config = RunConfig.desk_preset(grid={"probe_powers": [1.0, 2.0], "pump_powers": [5.0, 10.0]})
    keys = config.grid.cells()
    assert len(keys) == 3 * 2 * (1 + 2)
    first = keys[:3]
    assert [k.polarized for k in first] == [False, True, True]
    assert first[0].pump_power == 0.0
    assert [k.pump_power for k in first[1:]] == [5.0, 10.0]
    assert [k.seed_index for k in first] == [(0, 0, 0), (0, 0, 1), (0, 1, 1)]


def test_unpolarized_only_grid():
    config = RunConfig.desk_preset(grid={"polarizations": [False]})
    assert all(not k.polarized and k.pump_power == 0.0 for k in config.grid.cells())


def test_cell_seeds_are_common_across_probe_kinds():
    config = RunConfig.desk_preset(grid={"base_seed": 7})
    coherent = CellKey(ProbeKind.COHERENT, 1.0, 0.0, False, (1, 0, 0))
    squeezed = CellKey(ProbeKind.SQUEEZED, 1.0, 0.0, False, (1, 0, 0))
    assert cell_seed(config, coherent, 0) == cell_seed(config, squeezed, 0)
    assert cell_seed(config, coherent, 0) != cell_seed(config, coherent, 1)

    other = RunConfig.desk_preset(grid={"base_seed": 8})
    assert cell_seed(config, coherent, 0) != cell_seed(other, coherent, 0)


def test_bootstrap_streams_differ_per_channel():
    config = RunConfig.desk_preset()
    key = CellKey(ProbeKind.COHERENT, 1.0, 0.0, False)
    dc = bootstrap_seed(config, key, Channel.DC).generate_state(4)
    rf = bootstrap_seed(config, key, Channel.RF).generate_state(4)
    assert list(dc) != list(rf)


def test_cell_paths():
    key = CellKey(ProbeKind.ANTISQUEEZED, 1.5, 10.0, True)
    assert key.path_parts(Channel.RF) == ("rf", "antisqueezed", "pu10", "pr1.5", "pol")


def test_empty_report_frames():
    frames = CampaignReport(cells=[], decompositions=[], tables={}).to_frames()
    assert frames["cells"].empty
    assert frames["failures"].empty


def test_selftest_checks_are_named_uniquely():
    names = [c.name for c in CHECKS]
    assert len(names) == len(set(names))
    assert all(c.limit > 0 for c in CHECKS)


def test_band_mean_stderr_counts_correlated_bins():
    freqs = np.arange(101.0)
    s = synthetic_spectrum(NoiseFitModel(1.0, 0.0, 10.0), freqs, n_segments=200, expected=True)
    band = freqs >= 1
    assert band_mean_stderr(s, band) == pytest.approx(math.sqrt(1 / (200 * 100)))
    correlated = replace(s, meta=replace(s.meta, bin_correlation=2.0))
    assert band_mean_stderr(correlated, band) == pytest.approx(math.sqrt(2 / (200 * 100)))


def _small_config(**grid):
    return RunConfig.desk_preset(
        trajectory={"n_trajectories": 16},
        grid={
            "probe_kinds": [ProbeKind.COHERENT],
            "probe_powers": [1.0, 2.0, 3.0],
            "pump_powers": [10.0],
            "channels": [Channel.DC],
            "base_seed": 2,
            **grid,
        },
        fit={"n_boot": 20},
    )


@pytest.fixture(scope="module")
def small_report():
    return spinnoise.run(_small_config(), jobs=2)


@pytest.mark.slow
def test_campaign_decomposes_every_cell(small_report):
    assert small_report.failures == []
    assert len(small_report.cells) == 6
    summary = CampaignRunner.to_df(small_report)
    assert list(zip(summary["probe_power"], summary["pump_power"])) == [
        (1.0, 0.0),
        (1.0, 10.0),
        (2.0, 0.0),
        (2.0, 10.0),
        (3.0, 0.0),
        (3.0, 10.0),
    ]
    for cell in small_report.cells:
        assert cell.spectra[Channel.DC].n_used > 50


@pytest.mark.slow
def test_campaign_photon_shot_noise_is_linear(small_report):
    summary = CampaignRunner.to_df(small_report)
    unpol = summary[summary["pump_power"] == 0]
    # κ = 9.8 per mW, doubled by the lock-in
    for p, floor in zip(unpol["probe_power"], unpol["psn_floor"]):
        assert floor == pytest.approx(2 * 9.8 * p, rel=0.1)
    pol = summary[summary["pump_power"] > 0]
    for p, floor in zip(pol["probe_power"], pol["psn_floor_pol"]):
        assert floor == pytest.approx(2 * 9.8 * p, rel=0.1)


@pytest.mark.slow
def test_campaign_is_independent_of_worker_count(small_report):
    serial = CampaignRunner.run_campaign(_small_config(), jobs=1)
    assert serial.summary_frame().equals(small_report.summary_frame())


@pytest.mark.slow
def test_polarized_cell_without_reference_keeps_its_floor():
    config = _small_config(polarizations=[True], probe_powers=[1.0, 2.0, 3.0])
    report = CampaignRunner.run_campaign(config, jobs=2)
    summary = report.summary_frame()
    assert len(summary) == 3
    assert summary["spn_tot"].isna().all()
    assert summary["psn_floor_pol"].notna().all()


@pytest.mark.slow
@pytest.mark.parametrize("check", CHECKS, ids=lambda c: c.name)
def test_oracle_check(check):
    passed, detail = check.run(0, 4)
    assert passed, detail


@pytest.mark.slow
def test_unpolarized_spin_noise_matches_transduction_chain():
    config = RunConfig.desk_preset(trajectory={"n_trajectories": 128})
    key = CellKey(ProbeKind.COHERENT, 2.0, 0.0, False, (0, 0, 0))
    spectra, _ = CellRunner.spectra(config, key, [Channel.DC, Channel.RF])
    det, physical = config.detector, config.physical
    # Only the share of F_z transverse to the dc field precesses into the band
    expected = (
        (det.gain * det.g_f * det.s1(key.probe_power)) ** 2
        * physical.sigma_f2
        * math.sin(physical.dc_tilt) ** 2
    )
    for channel, record in spectra.items():
        spn_tot, _ = extract_spn(fit_noise_spectrum(record), 1.0)
        assert spn_tot == pytest.approx(expected, rel=0.1), channel
