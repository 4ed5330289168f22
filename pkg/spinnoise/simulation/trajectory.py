import math
from typing import Optional

import numpy as np

from spinnoise.errors.exceptions import ConfigValidationError, NonFiniteError
from spinnoise.helpers.constants import BURN_IN_RELAXATION_TIMES, MAX_PHASE_STEP
from spinnoise.helpers.logger import logger
from spinnoise.helpers.seed_helper import SeedHelper
from spinnoise.interfaces.physics import (
    DriveConfig,
    PhysicalParams,
    Trajectory,
    TrajectoryConfig,
)
from spinnoise.interfaces.probe import ProbeState
from spinnoise.readout.probe import DEFAULT_SHOT_NOISE_CONSTANT, sample_probe_noise
from spinnoise.simulation.bloch import BlochIntegrator
from spinnoise.simulation.pump import pump_rate


def check_trajectory_config(params: PhysicalParams, traj: TrajectoryConfig) -> None:
    phase_step = traj.dt * params.omega_larmor
    if phase_step > MAX_PHASE_STEP:
        raise ConfigValidationError(
            f"dt*omega_L = {phase_step:.4g} exceeds {MAX_PHASE_STEP}", key="trajectory.dt"
        )
    min_burn = BURN_IN_RELAXATION_TIMES / params.gamma0
    if traj.burn_in < min_burn:
        raise ConfigValidationError(
            f"burn_in must be >= 5/gamma0 = {min_burn:.4g} s", key="trajectory.burn_in"
        )


def simulate_trajectory(
    params: PhysicalParams,
    drive: DriveConfig,
    traj: TrajectoryConfig,
    probe: Optional[ProbeState] = None,
    kappa: float = DEFAULT_SHOT_NOISE_CONSTANT,
    detected: Optional[ProbeState] = None,
    s1: float = 0.0,
    initial: Optional[np.ndarray] = None,
) -> Trajectory:
    """
    Integrate `traj.n_trajectories` independent trajectories of the
    stochastic Bloch equation and return the samples after burn-in.

    `probe` is the pre-cell state whose S3 noise drives back-action;
    `detected` (default: `probe`) sets the S2 noise reaching the detector.
    With `probe=None` the probe light is noiseless. The S3 samples recorded
    in the result are exactly the ones applied in the torque.
    """
    check_trajectory_config(params, traj)
    detected = detected if detected is not None else probe
    K = traj.n_trajectories
    dt = traj.dt
    f_s = 1.0 / dt
    n_burn, n_keep = traj.n_burn_in, traj.n_steps
    total = n_burn + n_keep

    spin_rng, s2_rng, s3_rng = SeedHelper.streams(traj.seed, 3)
    integrator = BlochIntegrator(params, drive, dt)
    bound = params.soft_bound()

    if initial is None:
        # stationary unpolarized start
        F = math.sqrt(params.sigma_f2) * spin_rng.standard_normal((3, K))
    else:
        F = np.broadcast_to(np.asarray(initial, dtype=float).reshape(3, -1), (3, K)).copy()

    F_out = np.empty((n_keep, 3, K))
    s2_out = np.empty((n_keep, K))
    s3_out = np.empty((n_keep, K))
    excursions = 0

    logger.debug(
        f"simulating {K} trajectories: {total} steps of dt={dt:.3g}s "
        f"(P_pr={drive.probe_power} mW, P_pu={drive.pump_power} µW, polarized={drive.polarized})"
    )

    omega_static = integrator.rotation(0.0)
    i = 0
    while i < total:
        c = min(traj.chunk_steps, total - i)
        t_chunk = (i + np.arange(c + 1)) * dt
        rates = pump_rate(t_chunk, drive)
        noise_std = integrator.langevin_std(rates[:-1])
        dN = noise_std[:, None, None] * spin_rng.standard_normal((c, 3, K))
        if probe is not None and drive.probe_power > 0:
            s2 = sample_probe_noise(
                detected, drive.probe_power, f_s, (c, K), s2_rng, kappa
            ).s2_noise
            s3 = sample_probe_noise(
                probe, drive.probe_power, f_s, (c, K), s3_rng, kappa
            ).s3_noise
        else:
            s2 = np.zeros((c, K))
            s3 = np.zeros((c, K))

        history = np.empty((c, 3, K))
        for j in range(c):
            history[j] = F
            if integrator.static_field:
                omega0 = omega1 = omega_static
            else:
                omega0 = integrator.rotation(t_chunk[j])
                omega1 = integrator.rotation(t_chunk[j + 1])
            F = integrator.advance(
                F, omega0, omega1, rates[j], rates[j + 1], s3[j], dN[j]
            )

        if not np.all(np.isfinite(F)) or not np.all(np.isfinite(history)):
            raise NonFiniteError(t=float(t_chunk[-1]))
        excursions += int(np.count_nonzero(np.linalg.norm(history, axis=1) > bound))

        # keep the part of this chunk that lies after burn-in
        lo = max(n_burn - i, 0)
        if lo < c:
            dst = slice(i + lo - n_burn, i + c - n_burn)
            F_out[dst] = history[lo:]
            s2_out[dst] = s2[lo:]
            s3_out[dst] = s3[lo:]
        i += c

    if excursions:
        logger.warning(
            f"|F| exceeded the soft bound {bound:.4g} on {excursions} samples"
        )

    t = (n_burn + np.arange(n_keep)) * dt
    return Trajectory(
        t=t,
        F=np.ascontiguousarray(np.transpose(F_out, (2, 0, 1))),
        s1=s1,
        s2_out=np.ascontiguousarray(s2_out.T),
        s3_in=np.ascontiguousarray(s3_out.T),
        dt=dt,
        excursions=excursions,
        seed=traj.seed,
    )
