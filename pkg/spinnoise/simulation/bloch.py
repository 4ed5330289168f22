import math
from typing import Optional, Sequence

import numpy as np

from spinnoise.errors.exceptions import ConfigValidationError, NonFiniteError
from spinnoise.helpers.constants import MAX_PHASE_STEP
from spinnoise.interfaces.physics import DriveConfig, PhysicalParams, SpinState
from spinnoise.simulation.pump import pump_rate


def larmor_frequency(params: PhysicalParams) -> float:
    """ω_L = γ·B_dc in rad/s."""
    return params.gamma * params.b_dc


def rf_angular_frequency(params: PhysicalParams, drive: DriveConfig) -> float:
    return params.omega_rf if params.omega_rf is not None else drive.omega_pump


def field_rotation(params: PhysicalParams, drive: DriveConfig, t: float) -> np.ndarray:
    """Rotation vector −γB(t) (rad/s) of the dc plus rf field."""
    omega = -params.gamma * params.dc_field()
    if params.b_rf_amp:
        w = rf_angular_frequency(params, drive)
        omega[0] -= params.gamma * params.b_rf_amp * math.cos(w * t + params.rf_phase)
    return omega


class BlochIntegrator:
    """
    Stochastic Heun integrator for

        dF = {[−γB(t) + G_S·S3(t)·ẑ] × F − (Γ + R(t))·F + R(t)·F_max·ẑ} dt + dN

    with Γ = Γ0 + α·P_pr. S3 is held constant over a step, which makes the
    multiplicative torque a Stratonovich term. Spins are stored as (3, K)
    so that the components are contiguous rows.
    """

    def __init__(self, params: PhysicalParams, drive: DriveConfig, dt: float):
        self.params = params
        self.drive = drive
        self.dt = dt
        self.relax = params.relaxation_rate(drive.probe_power)
        self.f_max = params.f_max
        self.g_s = params.g_s
        self.static_field = not params.b_rf_amp

    def rotation(self, t: float) -> np.ndarray:
        return field_rotation(self.params, self.drive, t)

    def langevin_std(self, rate: np.ndarray) -> np.ndarray:
        """
        Std of the Langevin increment per component. The atomic (Γ0), probe
        (αP_pr) and pump (R) shares are independent, so their sum is drawn
        as one Gaussian of variance 2σ²(Γ + R)dt.
        """
        return np.sqrt(2.0 * self.params.sigma_f2 * (self.relax + rate) * self.dt)

    def drift(self, F: np.ndarray, omega: np.ndarray, omega_z, rate: float) -> np.ndarray:
        ox, oy = omega[0], omega[1]
        oz = omega[2] + omega_z
        fx, fy, fz = F[0], F[1], F[2]
        g = self.relax + rate
        out = np.empty_like(F)
        out[0] = oy * fz - oz * fy - g * fx
        out[1] = oz * fx - ox * fz - g * fy
        out[2] = ox * fy - oy * fx - g * fz + rate * self.f_max
        return out

    def advance(
        self,
        F: np.ndarray,
        omega0: np.ndarray,
        omega1: np.ndarray,
        rate0: float,
        rate1: float,
        s3,
        dN,
    ) -> np.ndarray:
        omega_z = self.g_s * s3
        a0 = self.drift(F, omega0, omega_z, rate0)
        predictor = F + a0 * self.dt + dN
        a1 = self.drift(predictor, omega1, omega_z, rate1)
        return F + 0.5 * self.dt * (a0 + a1) + dN


def step(
    state: SpinState,
    params: PhysicalParams,
    drive: DriveConfig,
    s3_noise,
    langevin: Sequence[np.ndarray] = (),
    *,
    dt: float,
) -> SpinState:
    """
    Advance the spin by one stochastic-Heun step of `dt` seconds.

    `langevin` holds the increments over this step (N_at, N_pr and, for a
    pumped ensemble, N_pu); each has the shape of `state.F`.
    """
    if not dt > 0:
        raise ConfigValidationError("dt must be positive", key="trajectory.dt", dt=dt)
    phase_step = dt * params.omega_larmor
    if phase_step > MAX_PHASE_STEP:
        raise ConfigValidationError(
            f"dt*omega_L = {phase_step:.4g} exceeds {MAX_PHASE_STEP}", key="trajectory.dt"
        )
    integrator = BlochIntegrator(params, drive, dt)
    F = np.moveaxis(np.asarray(state.F, dtype=float), -1, 0)
    dN: Optional[np.ndarray] = None
    for increment in langevin:
        inc = np.moveaxis(np.asarray(increment, dtype=float), -1, 0)
        dN = inc if dN is None else dN + inc
    if dN is None:
        dN = 0.0
    t0, t1 = state.t, state.t + dt
    rates = pump_rate(np.array([t0, t1]), drive)
    F_new = integrator.advance(
        F,
        integrator.rotation(t0),
        integrator.rotation(t1),
        float(rates[0]),
        float(rates[1]),
        np.asarray(s3_noise, dtype=float),
        dN,
    )
    if not np.all(np.isfinite(F_new)):
        raise NonFiniteError(t=t1)
    return SpinState(F=np.moveaxis(F_new, 0, -1), t=t1)
