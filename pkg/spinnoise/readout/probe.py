from typing import Tuple, Union

import numpy as np
from pydantic import ValidationError

from spinnoise.errors.exceptions import ConfigValidationError
from spinnoise.helpers.seed_helper import SeedHelper, SeedLike
from spinnoise.interfaces.probe import ProbeKind, ProbeState, StokesSample

DEFAULT_SHOT_NOISE_CONSTANT = 9.8


def white_noise_std(psd: float, f_s: float) -> float:
    """Per-sample std of a white stream with single-sided PSD `psd`."""
    return float(np.sqrt(psd * f_s / 2.0))


def sample_probe_noise(
    probe: ProbeState,
    probe_power: float,
    f_s: float,
    n: Union[int, Tuple[int, ...]],
    seed: SeedLike = None,
    kappa: float = DEFAULT_SHOT_NOISE_CONSTANT,
) -> StokesSample:
    """
    Independent white Gaussian S2 and S3 fluctuations with single-sided PSDs
    xi2·κ·P_pr and xibar2·κ·P_pr. `n` may be a shape whose last axis is time.

    Both streams are drawn from `seed` in a fixed order (S2 then S3), so a
    given seed yields the same unit-variance draws for every probe kind.
    """
    shape = (n,) if isinstance(n, (int, np.integer)) else tuple(n)
    if shape[-1] < 1:
        raise ConfigValidationError("sample count must be >= 1", key="n", n=shape[-1])
    if probe_power < 0 or f_s <= 0 or kappa < 0:
        raise ConfigValidationError(
            "probe power, sample rate and shot-noise constant must be non-negative",
            key="probe_power",
        )
    rng = SeedHelper.generator(seed)
    unit_s2 = rng.standard_normal(shape)
    unit_s3 = rng.standard_normal(shape)
    shot = kappa * probe_power
    return StokesSample(
        s1=0.0,
        s2_noise=white_noise_std(probe.xi2 * shot, f_s) * unit_s2,
        s3_noise=white_noise_std(probe.xibar2 * shot, f_s) * unit_s3,
        f_s=f_s,
    )


def apply_loss(probe: ProbeState, eta: float) -> ProbeState:
    """Beam-splitter loss: each factor becomes η·ξ + (1 − η)."""
    if not 0 < eta <= 1:
        raise ConfigValidationError("transmission must satisfy 0 < eta <= 1", key="eta", eta=eta)
    if eta == 1 or probe.kind == ProbeKind.COHERENT:
        return probe.model_copy(update={"loss": probe.loss * eta})
    try:
        return ProbeState(
            kind=probe.kind,
            xi2=eta * probe.xi2 + (1 - eta),
            xibar2=eta * probe.xibar2 + (1 - eta),
            loss=probe.loss * eta,
        )
    except ValidationError as e:
        raise ConfigValidationError(str(e), key="eta", eta=eta) from e


def loss_for_target(xi2: float, xi2_target: float) -> float:
    """Transmission η that degrades `xi2` to `xi2_target`."""
    if xi2 == 1:
        raise ConfigValidationError("a coherent state is loss-invariant", key="xi2")
    eta = (1 - xi2_target) / (1 - xi2)
    if not 0 < eta <= 1:
        raise ConfigValidationError(
            "target is not reachable by loss", key="xi2_target", eta=eta
        )
    return eta
