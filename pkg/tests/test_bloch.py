import math

import numpy as np
import pytest

from spinnoise.dsp.welch import welch_psd
from spinnoise.errors.exceptions import ConfigValidationError, NonFiniteError
from spinnoise.interfaces.physics import (
    DriveConfig,
    PhysicalParams,
    PumpWaveform,
    SpinState,
    TrajectoryConfig,
)
from spinnoise.interfaces.spectrum import TimeSeries
from spinnoise.simulation.bloch import field_rotation, larmor_frequency, step
from spinnoise.simulation.pump import pump_rate, pump_waveform, waveform_mean
from spinnoise.simulation.trajectory import simulate_trajectory

F_MAX = 6000.0


def _evolve(state, params, drive, n_steps, dt, s3=0.0):
    for _ in range(n_steps):
        state = step(state, params, drive, s3, dt=dt)
    return state


@pytest.mark.parametrize(
    "gamma, b_dc, expected",
    [
        (2 * math.pi * 7e9, 6e-6, 2 * math.pi * 42e3),
        (2 * math.pi * 7e9, 0.0, 0.0),
        (1.0, 1.0, 1.0),
    ],
)
def test_larmor_frequency(gamma, b_dc, expected):
    params = PhysicalParams(gamma=gamma, b_dc=b_dc)
    assert np.isclose(larmor_frequency(params), expected, rtol=1e-12, atol=0)


def test_dc_field_along_pump_axis_rotates_about_z():
    params = PhysicalParams(gamma=1.0, b_dc=3.0, dc_tilt=0.0)
    assert np.allclose(field_rotation(params, DriveConfig(), 0.0), [0.0, 0.0, -3.0])


def test_pure_precession_quarter_period():
    omega = 2 * math.pi * 10.0
    params = PhysicalParams(
        gamma=1.0, b_dc=omega, dc_tilt=0.0, gamma0=1e-12, alpha=0.0, g_s=0.0, f_max=F_MAX
    )
    n_steps = 2000
    dt = math.pi / (2 * omega) / n_steps
    state = _evolve(SpinState.along("x", F_MAX), params, DriveConfig(), n_steps, dt)

    assert state.t == pytest.approx(math.pi / (2 * omega))
    assert np.allclose(state.F, [0.0, -F_MAX, 0.0], atol=1e-3 * F_MAX)


def test_pumping_relaxes_to_fixed_point(still_params):
    drive = DriveConfig(
        probe_power=1.0,
        pump_power=2.0,
        pump_rate_peak=1.5,
        pump_waveform=PumpWaveform.CONSTANT,
        polarized=True,
    )
    rate = drive.peak_pump_rate
    state = _evolve(SpinState(F=np.zeros(3)), still_params, drive, 5000, 1e-3)

    expected = still_params.f_max * rate / (rate + still_params.gamma0)
    assert np.allclose(state.F, [0.0, 0.0, expected], rtol=1e-6, atol=1e-6)


def test_backaction_torque_acts_as_field_along_z():
    omega0 = 2 * math.pi * 5.0
    params = PhysicalParams(b_dc=0.0, gamma0=1e-12, alpha=0.0, g_s=0.5, f_max=F_MAX)
    n_steps = 2000
    dt = math.pi / (2 * omega0) / n_steps
    state = _evolve(
        SpinState.along("x", F_MAX), params, DriveConfig(), n_steps, dt, s3=omega0 / params.g_s
    )
    assert np.allclose(state.F, [0.0, F_MAX, 0.0], atol=1e-3 * F_MAX)


def test_langevin_increments_add(still_params):
    a = np.array([0.3, -0.1, 0.2])
    b = np.array([0.1, 0.4, -0.5])
    dt = 1e-6
    state = step(SpinState(F=np.zeros(3)), still_params, DriveConfig(), 0.0, (a, b), dt=dt)
    assert np.allclose(state.F, (a + b) * (1 - 0.5 * still_params.gamma0 * dt))


def test_step_keeps_batch_axis(still_params):
    F = np.tile([1.0, 0.0, 0.0], (4, 1))
    state = step(SpinState(F=F), still_params, DriveConfig(), np.zeros(4), dt=1e-4)
    assert state.F.shape == (4, 3)


def test_step_rejects_non_finite_state(still_params):
    params = still_params.model_copy(update={"g_s": 1.0})
    with pytest.raises(NonFiniteError):
        step(SpinState.along("x", 1.0), params, DriveConfig(), np.inf, dt=1e-3)


@pytest.mark.parametrize("waveform", list(PumpWaveform))
def test_waveform_mean_over_one_period(waveform):
    drive = DriveConfig(omega_pump=2 * math.pi, pump_waveform=waveform)
    t = np.arange(100000) / 100000
    assert np.mean(pump_waveform(t, drive)) == pytest.approx(waveform_mean(waveform), abs=1e-4)
    assert np.max(pump_waveform(t, drive)) == pytest.approx(1.0, abs=1e-6)


def test_pump_rate_is_zero_for_unpolarized_ensemble():
    drive = DriveConfig(pump_power=15.0, pump_waveform=PumpWaveform.CONSTANT)
    assert not np.any(pump_rate(np.linspace(0, 1, 11), drive))


def test_step_needs_an_explicit_dt(still_params):
    with pytest.raises(TypeError):
        step(SpinState.along("x", 1.0), still_params, DriveConfig(), 0.0)


def test_step_enforces_phase_step_limit():
    params = PhysicalParams(gamma=1.0, b_dc=2 * math.pi * 100.0, g_s=0.0)
    with pytest.raises(ConfigValidationError):
        step(SpinState.along("x", 1.0), params, DriveConfig(), 0.0, dt=1e-3)
    with pytest.raises(ConfigValidationError):
        step(SpinState.along("x", 1.0), params, DriveConfig(), 0.0, dt=0.0)


def test_free_decay_shrinks_the_spin_exponentially():
    gamma0 = 5.0
    params = PhysicalParams(
        gamma=1.0, b_dc=2 * math.pi * 10.0, gamma0=gamma0, alpha=0.0, g_s=0.0, f_max=F_MAX
    )
    n_steps, dt = 2000, 1e-4
    state = _evolve(SpinState.along("x", F_MAX), params, DriveConfig(), n_steps, dt)
    expected = F_MAX * math.exp(-gamma0 * n_steps * dt)
    assert np.linalg.norm(state.F) == pytest.approx(expected, rel=1e-5)


def _decaying_precession_error(n_steps: int) -> float:
    omega, gamma0, duration = 2 * math.pi * 10.0, 3.0, 0.1
    params = PhysicalParams(
        gamma=1.0, b_dc=omega, dc_tilt=0.0, gamma0=gamma0, alpha=0.0, g_s=0.0
    )
    state = _evolve(SpinState.along("x", 1.0), params, DriveConfig(), n_steps, duration / n_steps)
    decay = math.exp(-gamma0 * duration)
    exact = decay * np.array([math.cos(omega * duration), -math.sin(omega * duration), 0.0])
    return float(np.linalg.norm(state.F - exact))


def test_heun_error_is_second_order_in_dt():
    coarse = _decaying_precession_error(200)
    fine = _decaying_precession_error(400)
    assert coarse / fine == pytest.approx(4.0, rel=0.15)


def test_trajectory_spectrum_peaks_at_larmor_frequency():
    f_larmor = 50.0
    params = PhysicalParams(
        gamma=1.0,
        b_dc=2 * math.pi * f_larmor,
        gamma0=2 * math.pi * 2.0,
        alpha=0.0,
        g_s=0.0,
        sigma_f2=1.0,
    )
    traj = simulate_trajectory(
        params,
        DriveConfig(probe_power=1.0),
        TrajectoryConfig(dt=1e-4, duration=2.0, burn_in=0.5, n_trajectories=8, seed=4),
    )
    s = welch_psd(TimeSeries(traj.component("z"), traj.sample_rate), segment_len=4096)
    # the longitudinal share of F_z sits at 0 Hz
    band = (s.freqs > 20.0) & (s.freqs < 200.0)
    peak = s.freqs[band][np.argmax(s.psd[band])]
    assert peak == pytest.approx(f_larmor, abs=2 * s.df)
