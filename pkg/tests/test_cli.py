import json

import numpy as np
import pytest

from spinnoise.cli.cli import main
from spinnoise.fitting.whittle import synthetic_spectrum
from spinnoise.helpers.config import ConfigHelper
from spinnoise.helpers.constants import MANIFEST_FILE_NAME
from spinnoise.interfaces.config import RunConfig
from spinnoise.store import RecordIO


def _error(capsys) -> dict:
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.fixture
def desk_file(tmp_path):
    path = tmp_path / "desk.yaml"
    ConfigHelper.save_config(RunConfig.desk_preset(), path)
    return path


def test_no_command_prints_help(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().out


def test_unknown_command_is_a_user_error(capsys):
    assert main(["calibrate"]) == 1
    assert _error(capsys)["error"] == "ConfigError"


def test_invalid_config_reports_key(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("physical:\n  bogus: 1\n")
    assert main(["sweep", "--config", str(path)]) == 1
    err = _error(capsys)
    assert err["error"] == "ConfigValidationError"
    assert err["extra_info"]["key"] == "physical.bogus"
    assert err["exit_code"] == 1


def test_malformed_override_is_a_user_error(capsys):
    assert main(["sweep", "--set", "physical.b_dc"]) == 1
    assert _error(capsys)["error"] == "ConfigError"


def test_fit_on_fully_masked_spectrum_fails(tmp_path, reference_model, reference_freqs, capsys):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=0)
    path = tmp_path / "masked.csv"
    RecordIO.write_spectrum(s.with_mask(np.zeros(s.freqs.size, dtype=bool)), path)
    assert main(["fit", str(path)]) == 1
    assert _error(capsys)["error"] == "SpectrumValidationError"


def test_fit_writes_fit_document(tmp_path, reference_model, reference_freqs, capsys):
    s = synthetic_spectrum(reference_model, reference_freqs, n_segments=200, seed=0)
    path = tmp_path / "dc.csv"
    RecordIO.write_spectrum(s, path)
    assert main(["fit", str(path), "--set", "fit.n_boot=10"]) == 0

    printed = json.loads(capsys.readouterr().out)
    assert printed[0]["bootstrap"]["n_boot"] == 10
    fit = RecordIO.read_fit(tmp_path / "dc.fit.json")
    assert fit.model.delta_f == pytest.approx(80.0, rel=0.05)


def test_simulate_then_demod(tmp_path, desk_file, capsys):
    out = tmp_path / "cell"
    flags = ["--config", str(desk_file), "--out", str(out), "--set", "trajectory.n_trajectories=2"]
    assert main(["simulate", *flags, "--probe-power", "2.0", "--seed", "3"]) == 0
    trajectory = out / "trajectories" / "trajectory.csv"
    assert trajectory.exists()

    assert main(["demod", *flags, "--input", str(trajectory), "--channel", "both"]) == 0
    spectrum = RecordIO.read_spectrum(out / "spectra" / "rf.csv")
    assert spectrum.meta.probe_power == 2.0
    assert spectrum.freqs.max() == pytest.approx(100.0)
    assert spectrum.n_used == np.count_nonzero(spectrum.freqs <= 60.0)


@pytest.mark.slow
def test_sweep_twice_gives_identical_manifests(tmp_path, desk_file):
    flags = [
        "--config",
        str(desk_file),
        "--seed",
        "7",
        "--channel",
        "dc",
        "--set",
        "grid.probe_kinds=[coherent]",
        "grid.probe_powers=[1.0,2.0,3.0]",
        "grid.polarizations=[false]",
        "trajectory.n_trajectories=16",
        "fit.n_boot=20",
    ]
    manifests = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["sweep", *flags, "--out", str(out)]) == 0
        manifests.append((out / MANIFEST_FILE_NAME).read_bytes())
    assert manifests[0] == manifests[1]

    assert main(["report", "--input", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "tables" / "spn_vs_probe.csv").exists()


def test_selftest_single_check(capsys):
    assert main(["selftest", "--only", "fit_fidelity"]) == 0
    results = json.loads(capsys.readouterr().out)
    assert [r["check"] for r in results] == ["fit_fidelity"]
    assert results[0]["passed"]
