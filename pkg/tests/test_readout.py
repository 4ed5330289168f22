import math

import numpy as np
import pytest
from pydantic import ValidationError

from spinnoise.dsp.welch import welch_psd
from spinnoise.errors.exceptions import ConfigValidationError, SmallAngleViolation
from spinnoise.interfaces.probe import DetectorConfig, ProbeKind, ProbeState, StokesSample
from spinnoise.interfaces.spectrum import TimeSeries
from spinnoise.readout.polarimeter import polarimeter_readout
from spinnoise.readout.probe import apply_loss, loss_for_target, sample_probe_noise

F_S = 1e4


def _mean_psd(x: np.ndarray, f_s: float = F_S) -> float:
    s = welch_psd(TimeSeries(x, f_s), segment_len=1000, keep_segments=False)
    return float(np.mean(s.psd[1:-1]))


def test_coherent_streams_have_shot_noise_psd():
    sample = sample_probe_noise(ProbeState.coherent(), 1.0, F_S, 1_000_000, seed=0, kappa=1.0)
    assert sample.s1 == 0.0
    assert _mean_psd(sample.s2_noise) == pytest.approx(1.0, rel=0.03)
    assert _mean_psd(sample.s3_noise) == pytest.approx(1.0, rel=0.03)


def test_squeezed_detected_noise_is_reduced():
    n = 400_000
    coherent = sample_probe_noise(ProbeState.coherent(), 1.0, F_S, n, seed=4)
    squeezed = sample_probe_noise(ProbeState.squeezed(0.76, 1.85), 1.0, F_S, n, seed=4)
    # same seed: identical unit draws, so the ratio is exact
    ratio = np.var(squeezed.s2_noise) / np.var(coherent.s2_noise)
    assert 10 * math.log10(ratio) == pytest.approx(-1.19, abs=0.01)
    assert np.var(squeezed.s3_noise) / np.var(coherent.s3_noise) == pytest.approx(1.85)


def test_no_light_gives_zero_streams():
    sample = sample_probe_noise(ProbeState.squeezed(0.76, 1.85), 0.0, F_S, (3, 100), seed=1)
    assert sample.s2_noise.shape == (3, 100)
    assert not np.any(sample.s2_noise)
    assert not np.any(sample.s3_noise)


def test_probe_state_invariants():
    with pytest.raises(ValidationError):
        ProbeState(kind=ProbeKind.COHERENT, xi2=0.5, xibar2=2.0)
    with pytest.raises(ValidationError):
        ProbeState.squeezed(0.5, 1.5)
    with pytest.raises(ValidationError):
        ProbeState.antisqueezed(0.76, 1.85)


def test_swapped_exchanges_quadratures():
    asq = ProbeState.squeezed(0.76, 1.85).swapped()
    assert asq.kind == ProbeKind.ANTISQUEEZED
    assert (asq.xi2, asq.xibar2) == (1.85, 0.76)
    assert asq.swapped() == ProbeState.squeezed(0.76, 1.85)
    assert ProbeState.of_kind(ProbeKind.ANTISQUEEZED, 0.76, 1.85) == asq


def test_from_db():
    probe = ProbeState.from_db(-2.0, 3.0)
    assert probe.xi2 == pytest.approx(0.631, abs=1e-3)
    assert probe.squeezing_db == pytest.approx(-2.0)


def test_apply_loss():
    squeezed = ProbeState.squeezed(0.631, 1.8)
    assert apply_loss(squeezed, 1.0) == squeezed

    eta = loss_for_target(0.631, 0.661)
    assert eta == pytest.approx(0.919, abs=1e-3)
    degraded = apply_loss(squeezed, eta)
    assert degraded.xi2 == pytest.approx(0.661)
    assert degraded.loss == pytest.approx(eta)

    coherent = apply_loss(ProbeState.coherent(), 0.3)
    assert (coherent.xi2, coherent.xibar2) == (1.0, 1.0)


@pytest.mark.parametrize("eta", [0.0, -0.1, 1.5])
def test_apply_loss_rejects_bad_transmission(eta):
    with pytest.raises(ConfigValidationError):
        apply_loss(ProbeState.coherent(), eta)


def test_loss_cannot_improve_squeezing():
    with pytest.raises(ConfigValidationError):
        loss_for_target(0.661, 0.631)


def _stokes(n: int, s1: float = 100.0, noise: float = 0.0, seed: int = 0) -> StokesSample:
    rng = np.random.default_rng(seed)
    return StokesSample(
        s1=s1,
        s2_noise=noise * rng.standard_normal(n),
        s3_noise=np.zeros(n),
        f_s=F_S,
    )


def test_readout_of_zero_spin_without_noise_is_zero():
    v = polarimeter_readout(np.zeros(64), _stokes(64), DetectorConfig())
    assert not np.any(v.values)


def test_readout_is_linear_in_spin():
    det = DetectorConfig(gain=2.0, g_f=1e-3)
    stokes = _stokes(1000, s1=50.0)
    t = stokes.t
    amplitude, f_l = 10.0, 250.0
    v = polarimeter_readout(amplitude * np.cos(2 * math.pi * f_l * t), stokes, det)
    assert np.max(np.abs(v.values)) == pytest.approx(2.0 * 1e-3 * amplitude * 50.0)


def test_readout_noise_psd_scales_with_gain():
    det = DetectorConfig(gain=3.0)
    n = 200_000
    kappa, power = 2.0, 1.5
    sample = sample_probe_noise(ProbeState.coherent(), power, F_S, n, seed=2, kappa=kappa)
    stokes = StokesSample(s1=det.s1(power), s2_noise=sample.s2_noise, s3_noise=sample.s3_noise, f_s=F_S)
    v = polarimeter_readout(np.zeros(n), stokes, det)
    assert _mean_psd(v.values) == pytest.approx(det.gain**2 * kappa * power, rel=0.03)


def test_large_rotation_is_rejected():
    det = DetectorConfig(g_f=1e-3)
    with pytest.raises(SmallAngleViolation):
        polarimeter_readout(np.full(8, 100.0), _stokes(8), det)


def test_technical_tone_is_added():
    det = DetectorConfig(technical_tones=[(50.0, 0.5)])
    v = polarimeter_readout(np.zeros(200), _stokes(200), det)
    assert np.allclose(v.values, 0.5 * np.cos(2 * math.pi * 50.0 * v.t))
