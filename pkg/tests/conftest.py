import os

import numpy as np
import pytest

from spinnoise.interfaces.config import RunConfig
from spinnoise.interfaces.fit import NoiseFitModel
from spinnoise.interfaces.physics import DriveConfig, PhysicalParams, PumpWaveform
from spinnoise.interfaces.spectrum import Channel


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    # RunConfig reads SPINNOISE_* overrides from the environment
    for name in list(os.environ):
        if name.upper().startswith("SPINNOISE_"):
            monkeypatch.delenv(name, raising=False)


@pytest.fixture
def desk_config():
    return RunConfig.desk_preset(grid={"channels": [Channel.DC]})


@pytest.fixture
def still_params():
    """No field, no broadening and no back-action."""
    return PhysicalParams(b_dc=0.0, gamma0=1.0, alpha=0.0, g_s=0.0, sigma_f2=1.0)


@pytest.fixture
def constant_drive():
    return DriveConfig(probe_power=1.0, pump_waveform=PumpWaveform.CONSTANT)


@pytest.fixture
def reference_model():
    return NoiseFitModel(s_psn=4.0, s_atomic=10.0, delta_f=80.0)


@pytest.fixture
def reference_freqs():
    # 0-1000 Hz at 1.95 Hz
    return np.linspace(0.0, 1000.0, 513)
