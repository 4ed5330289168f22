import math

import numpy as np
import pytest

from spinnoise.errors.exceptions import ConfigValidationError
from spinnoise.interfaces.physics import (
    DriveConfig,
    PhysicalParams,
    PumpWaveform,
    TrajectoryConfig,
)
from spinnoise.interfaces.probe import ProbeState
from spinnoise.simulation.trajectory import simulate_trajectory

GAMMA0 = 2 * math.pi * 5.0


@pytest.fixture
def ou_params():
    return PhysicalParams(b_dc=0.0, gamma0=GAMMA0, alpha=0.0, g_s=0.0, sigma_f2=1.0)


def test_empty_series_after_burn_in(ou_params):
    traj = simulate_trajectory(
        ou_params,
        DriveConfig(),
        TrajectoryConfig(dt=1e-3, duration=0.0, burn_in=0.2, n_trajectories=3),
    )
    assert traj.n_samples == 0
    assert traj.F.shape == (3, 0, 3)
    assert traj.s2_out.shape == (3, 0)


def test_same_seed_is_bit_identical():
    params = PhysicalParams(b_dc=1e-8, gamma0=GAMMA0, dc_tilt=math.pi / 4)
    cfg = TrajectoryConfig(dt=1e-4, duration=0.2, burn_in=0.2, n_trajectories=2, seed=11)
    runs = [
        simulate_trajectory(params, DriveConfig(), cfg, probe=ProbeState.coherent())
        for _ in range(2)
    ]
    assert np.array_equal(runs[0].F, runs[1].F)
    assert np.array_equal(runs[0].s2_out, runs[1].s2_out)
    assert np.array_equal(runs[0].s3_in, runs[1].s3_in)

    other = simulate_trajectory(
        params, DriveConfig(), cfg.model_copy(update={"seed": 12}), probe=ProbeState.coherent()
    )
    assert not np.array_equal(runs[0].F, other.F)


def test_unpumped_spins_are_ornstein_uhlenbeck(ou_params):
    traj = simulate_trajectory(
        ou_params,
        DriveConfig(),
        TrajectoryConfig(dt=1e-3, duration=20.0, burn_in=0.5, n_trajectories=16, seed=3),
    )
    variance = np.mean(traj.F**2, axis=(0, 1))
    assert np.allclose(variance, ou_params.sigma_f2, rtol=0.08)
    assert np.allclose(np.mean(traj.F, axis=(0, 1)), 0.0, atol=0.05)
    assert traj.excursions == 0


def test_pumped_mean_spin_matches_steady_state():
    params = PhysicalParams(b_dc=0.0, gamma0=100.0, alpha=0.0, g_s=0.0, f_max=6000.0)
    drive = DriveConfig(
        pump_power=10.0, pump_rate_peak=10.0, pump_waveform=PumpWaveform.CONSTANT, polarized=True
    )
    traj = simulate_trajectory(
        params,
        drive,
        TrajectoryConfig(dt=1e-4, duration=0.5, burn_in=0.1, n_trajectories=4, seed=5),
    )
    assert np.mean(traj.component("z")) == pytest.approx(3000.0, rel=1e-2)


def test_noiseless_probe_records_zero_stokes_noise(ou_params):
    traj = simulate_trajectory(
        ou_params, DriveConfig(), TrajectoryConfig(dt=1e-3, duration=0.1, burn_in=0.2)
    )
    assert not np.any(traj.s2_out)
    assert not np.any(traj.s3_in)


def test_recorded_stokes_streams_follow_probe_state(ou_params):
    probe = ProbeState.squeezed(0.5, 4.0)
    traj = simulate_trajectory(
        ou_params,
        DriveConfig(probe_power=1.0),
        TrajectoryConfig(dt=1e-3, duration=5.0, burn_in=0.2, n_trajectories=8, seed=1),
        probe=probe,
        kappa=1.0,
    )
    # white stream of single-sided PSD S has variance S·f_s/2
    f_s = traj.sample_rate
    assert np.var(traj.s2_out) == pytest.approx(probe.xi2 * f_s / 2, rel=0.03)
    assert np.var(traj.s3_in) == pytest.approx(probe.xibar2 * f_s / 2, rel=0.03)


@pytest.mark.parametrize(
    "params, cfg, key",
    [
        (
            PhysicalParams(b_dc=6e-6),
            TrajectoryConfig(dt=1e-6, duration=1e-3, burn_in=0.1),
            "trajectory.dt",
        ),
        (
            PhysicalParams(b_dc=0.0, gamma0=GAMMA0),
            TrajectoryConfig(dt=1e-3, duration=1.0, burn_in=0.01),
            "trajectory.burn_in",
        ),
    ],
)
def test_invalid_trajectory_config(params, cfg, key):
    with pytest.raises(ConfigValidationError) as e:
        simulate_trajectory(params, DriveConfig(), cfg)
    assert e.value.key == key
