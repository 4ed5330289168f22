import math
import tempfile
import time
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate
from timeout_decorator import TimeoutError as CheckTimeout
from timeout_decorator import timeout

from spinnoise.dsp.lockin import lockin_demodulate
from spinnoise.dsp.welch import welch_psd
from spinnoise.fitting.bootstrap import bootstrap_fit
from spinnoise.fitting.lorentzian import lorentzian, total_power
from spinnoise.fitting.whittle import fit_noise_spectrum, synthetic_spectrum
from spinnoise.helpers.logger import logger
from spinnoise.helpers.seed_helper import SeedHelper
from spinnoise.interfaces.config import RunConfig
from spinnoise.interfaces.fit import PARAMETER_NAMES, NoiseFitModel
from spinnoise.interfaces.physics import DriveConfig, PhysicalParams, TrajectoryConfig
from spinnoise.interfaces.probe import ProbeKind
from spinnoise.interfaces.spectrum import Channel, SpectrumRecord, TimeSeries
from spinnoise.readout.probe import white_noise_std
from spinnoise.runner.run import CampaignRunner
from spinnoise.scaling.tables import ScalingTables
from spinnoise.simulation.trajectory import simulate_trajectory
from spinnoise.store.result_store import ResultStore

Outcome = Tuple[bool, str]

# Synthetic spectrum shared by the fit checks: 0-100 Hz at 0.78 Hz
REFERENCE_MODEL = NoiseFitModel(s_psn=20.0, s_atomic=200.0, delta_f=10.0)
REFERENCE_FREQS = np.arange(129) * 0.78125


def _row(df: pd.DataFrame, **where) -> Optional[pd.Series]:
    sel = df
    for column, value in where.items():
        sel = sel[np.isclose(sel[column], value)] if isinstance(value, float) else sel[sel[column] == value]
    return sel.iloc[0] if len(sel) else None


def _within(value: float, target: float, tol: float) -> bool:
    return value is not None and np.isfinite(value) and abs(value - target) <= tol


def check_fit_fidelity(seed: int, jobs: int = 1) -> Outcome:
    s = synthetic_spectrum(REFERENCE_MODEL, REFERENCE_FREQS, n_segments=200, seed=seed)
    fit = fit_noise_spectrum(s)
    errors = {
        name: abs(getattr(fit.model, name) / getattr(REFERENCE_MODEL, name) - 1)
        for name in PARAMETER_NAMES
    }
    numeric, _ = integrate.quad(lambda f: 200.0 * lorentzian(f, 10.0), 0, np.inf, limit=200)
    closed = total_power(200.0, 10.0)
    passed = all(e < 0.05 for e in errors.values()) and abs(closed / numeric - 1) < 1e-3
    detail = ", ".join(f"{k} {100 * v:.2f}%" for k, v in errors.items())
    return passed, f"{detail}; total power {closed:.6g} vs quad {numeric:.6g}"


def check_ou_oracle(seed: int, jobs: int = 1) -> Outcome:
    gamma = 2 * math.pi * 5.0
    params = PhysicalParams(b_dc=0.0, gamma0=gamma, alpha=0.0, g_s=0.0, sigma_f2=1.0)
    traj = simulate_trajectory(
        params,
        DriveConfig(probe_power=1.0),
        TrajectoryConfig(dt=1e-3, duration=40.0, burn_in=1.0, n_trajectories=64, seed=seed),
    )
    f_z = traj.component("z")
    s = welch_psd(TimeSeries(f_z, traj.sample_rate), segment_len=4096, keep_segments=False)
    band = (s.freqs > 0) & (s.freqs <= 5 * gamma / (2 * math.pi))
    f = s.freqs[band]
    expected = 4 * params.sigma_f2 * gamma / (gamma**2 + (2 * math.pi * f) ** 2)
    rms = float(np.sqrt(np.mean((s.psd[band] / expected - 1) ** 2)))
    variance = float(np.mean(f_z**2))
    passed = rms < 0.05 and abs(variance / params.sigma_f2 - 1) < 0.03
    return passed, f"PSD rms deviation {100 * rms:.2f}%, variance {variance:.4f}"


def band_mean_stderr(s: SpectrumRecord, band: np.ndarray) -> float:
    """Relative standard error of the mean PSD level over the `band` bins."""
    return math.sqrt(s.bin_correlation / (s.shape * np.count_nonzero(band)))


def check_lockin_white_noise(seed: int, jobs: int = 1, n_sigma: float = 4.0) -> Outcome:
    f_s, s0 = 12800.0, 3.0
    rng = SeedHelper.generator(seed)
    x = white_noise_std(s0, f_s) * rng.standard_normal((32, 1 << 16))
    demod = lockin_demodulate(TimeSeries(x, f_s), f_ref=100.0, lp_cutoff=80.0, decim=64)
    ratios, tol = {}, 0.0
    for channel in Channel:
        s = welch_psd(demod.channel(channel), segment_len=256, keep_segments=False)
        band = (s.freqs >= 5) & (s.freqs <= 60)
        ratios[channel.value] = float(np.mean(s.psd[band]) / (2 * s0))
        tol = max(tol, n_sigma * band_mean_stderr(s, band))
    passed = all(abs(r - 1) < tol for r in ratios.values())
    detail = ", ".join(f"{k}: {v:.4f} x 2*S0" for k, v in ratios.items())
    return passed, f"{detail} (tolerance {tol:.4f})"


def check_bootstrap_coverage(seed: int, jobs: int = 1, trials: int = 200) -> Outcome:
    children = SeedHelper.sequence(seed).spawn(trials)
    hits = dict.fromkeys(PARAMETER_NAMES, 0)
    for child in children:
        data_seed, boot_seed = child.spawn(2)
        s = synthetic_spectrum(REFERENCE_MODEL, REFERENCE_FREQS, n_segments=200, seed=data_seed)
        boot = bootstrap_fit(s, n_boot=100, seed=boot_seed, jobs=jobs)
        for name in PARAMETER_NAMES:
            lo, _, hi = boot.percentiles[name]
            hits[name] += lo <= getattr(REFERENCE_MODEL, name) <= hi
    coverage = {k: v / trials for k, v in hits.items()}
    passed = all(0.58 <= c <= 0.78 for c in coverage.values())
    return passed, ", ".join(f"{k} {100 * c:.0f}%" for k, c in coverage.items())


def _desk(seed: int, **sections) -> RunConfig:
    grid = {"channels": [Channel.DC], "base_seed": seed, **sections.pop("grid", {})}
    return RunConfig.desk_preset(grid=grid, **sections)


def check_spn_scaling(seed: int, jobs: int = 1) -> Outcome:
    config = _desk(seed, grid={"polarizations": [False]})
    report = CampaignRunner.run_campaign(config, jobs=jobs)
    tables = report.tables
    exponent = _row(tables["exponents"], quantity="spn_tot", kind="coh", channel="dc")
    width = _row(tables["linewidth"], kind="coh", channel="dc")
    spn = tables["spn_vs_probe"]
    coh = _row(spn, kind="coh", channel="dc")
    top = report.summary_frame()
    top = _row(top[top["kind"] == "coherent"], probe_power=config.grid.top_probe_power)
    psn = tables["psn_vs_probe"]
    sq = _row(psn, kind="sq", channel="dc", pump_power=0.0)
    asq = _row(psn, kind="asq", channel="dc", pump_power=0.0)
    spn_db = [_row(spn, kind=k, channel="dc") for k in ("sq", "asq")]

    checks = {
        "spn exponent": exponent is not None and _within(exponent["exponent"], 2.0, 0.15),
        "linewidth slope": width is not None
        and _within(width["slope"] / width["expected_slope"], 1.0, 0.10),
        "peak broadening": coh is not None
        and top is not None
        and top["spn_peak"]
        < coh["peak_a0"] + coh["peak_a2"] * config.grid.top_probe_power**2,
        "sq psn dB": sq is not None and _within(sq["db_vs_coh"], -1.19, 0.3),
        "asq psn dB": asq is not None and _within(asq["db_vs_coh"], 2.67, 0.4),
        "spn total dB": all(
            r is not None and _within(r["total_db_vs_coh"], 0.0, 0.5) for r in spn_db
        ),
    }
    return all(checks.values()), _describe(checks)


def check_psn_and_mba_laws(seed: int, jobs: int = 1) -> Outcome:
    config = _desk(
        seed,
        physical={"alpha": 0.0},
        grid={"probe_kinds": [ProbeKind.COHERENT], "pump_powers": [5.0, 10.0, 15.0]},
    )
    report = CampaignRunner.run_campaign(config, jobs=jobs)
    tables = report.tables
    psn_exp = _row(tables["exponents"], quantity="psn_floor", kind="coh", channel="dc")
    pump = _row(tables["psn_vs_pump"], kind="coh", channel="dc")
    mba_exp = _row(
        tables["exponents"], quantity="mba_tot", kind="coh", channel="dc", pump_power=10.0
    )
    mba = tables["mba_vs_probe"]
    a3_5 = _row(mba, kind="coh", channel="dc", pump_power=5.0)
    a3_10 = _row(mba, kind="coh", channel="dc", pump_power=10.0)
    ratio = a3_10["a3"] / a3_5["a3"] if a3_5 is not None and a3_10 is not None else None

    checks = {
        "psn exponent": psn_exp is not None and _within(psn_exp["exponent"], 1.0, 0.10),
        "psn pump slope": pump is not None
        and abs(pump["pump_slope"]) <= 2 * pump["pump_slope_err"],
        "mba exponent": mba_exp is not None and _within(mba_exp["exponent"], 3.0, 0.2),
        "mba pump ratio": _within(ratio, 4.0, 1.0),
    }
    return all(checks.values()), _describe(checks)


def check_null_backaction(seed: int, jobs: int = 1) -> Outcome:
    config = _desk(
        seed,
        physical={"alpha": 0.0, "g_s": 0.0},
        grid={"probe_kinds": [ProbeKind.COHERENT], "pump_powers": [5.0, 15.0]},
    )
    summary = CampaignRunner.run_campaign(config, jobs=jobs).summary_frame()
    pol = summary[summary["pump_power"] > 0]
    consistent = np.abs(pol["mba_tot"]) < 2 * pol["mba_tot_sigma"]
    fraction = float(consistent.mean()) if len(pol) else 0.0
    return fraction >= 0.9, f"{100 * fraction:.0f}% of {len(pol)} cells within 2 sigma of zero"


def check_channel_equivalence(seed: int, jobs: int = 1) -> Outcome:
    config = _desk(
        seed,
        grid={
            "channels": [Channel.DC, Channel.RF],
            "probe_kinds": [ProbeKind.COHERENT],
            "pump_powers": [10.0],
        },
    )
    report = CampaignRunner.run_campaign(config, jobs=jobs)
    pairs = ScalingTables.channel_agreement(report.tables.get("exponents", pd.DataFrame()))
    compared = set(pairs["quantity"]) if len(pairs) else set()
    missing = {"psn_floor", "spn_tot", "mba_tot"} - compared
    agree = int(pairs["agree"].sum()) if len(pairs) else 0
    passed = not missing and agree == len(pairs)
    detail = ", ".join(
        f"{r.quantity} {r.exponent_dc:.3g} vs {r.exponent_rf:.3g}" for r in pairs.itertuples()
    )
    if missing:
        detail += f"; no dc/rf pair for {', '.join(sorted(missing))}"
    return passed, f"{agree}/{len(pairs)} exponents agree: {detail}"


def check_determinism(seed: int, jobs: int = 1) -> Outcome:
    config = _desk(
        seed,
        grid={
            "probe_kinds": [ProbeKind.COHERENT],
            "probe_powers": [1.0, 2.0, 3.0],
            "polarizations": [False],
        },
        fit={"n_boot": 20},
    )
    manifests = []
    with tempfile.TemporaryDirectory() as tmp:
        for run in ("a", "b"):
            store = ResultStore(Path(tmp) / run)
            CampaignRunner.sweep(config, store, jobs=jobs)
            store.finalize(command="selftest", seed=seed)
            manifests.append(store.manifest())
    same = manifests[0] == manifests[1]
    return same, f"{len(manifests[0])} artifacts, manifests {'identical' if same else 'differ'}"


def _describe(checks: Dict[str, bool]) -> str:
    return ", ".join(f"{name}: {'ok' if ok else 'FAIL'}" for name, ok in checks.items())


@dataclass
class SelfTestCheck:
    name: str
    run: Callable[..., Outcome]
    limit: int  # seconds


@dataclass
class SelfTestResult:
    name: str
    passed: bool
    detail: str
    elapsed: float

    def as_dict(self) -> dict:
        return {
            "check": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "elapsed_s": round(self.elapsed, 1),
        }


CHECKS: List[SelfTestCheck] = [
    SelfTestCheck("fit_fidelity", check_fit_fidelity, 30),
    SelfTestCheck("ou_oracle", check_ou_oracle, 60),
    SelfTestCheck("lockin_white_noise", check_lockin_white_noise, 30),
    SelfTestCheck("bootstrap_coverage", check_bootstrap_coverage, 240),
    SelfTestCheck("spn_scaling", check_spn_scaling, 180),
    SelfTestCheck("psn_and_mba_laws", check_psn_and_mba_laws, 180),
    SelfTestCheck("null_backaction", check_null_backaction, 120),
    SelfTestCheck("channel_equivalence", check_channel_equivalence, 180),
    SelfTestCheck("determinism", check_determinism, 60),
]


class SelfTest:
    @staticmethod
    def run(
        seed: int = 0, jobs: int = 1, only: Optional[List[str]] = None
    ) -> List[SelfTestResult]:
        """Run the oracle checks, each under its own time limit."""
        results = []
        for check in CHECKS:
            if only and check.name not in only:
                continue
            logger.info(f"selftest: {check.name} (limit {check.limit}s)")
            start = time.perf_counter()
            try:
                passed, detail = timeout(check.limit)(check.run)(seed, jobs)
            except CheckTimeout:
                passed, detail = False, f"exceeded {check.limit}s"
            except Exception as e:
                logger.debug(traceback.format_exc())
                passed, detail = False, f"{type(e).__name__}: {e}"
            result = SelfTestResult(check.name, bool(passed), detail, time.perf_counter() - start)
            if result.passed:
                logger.success(f"PASS {check.name}: {detail}")
            else:
                logger.error(f"FAIL {check.name}: {detail}")
            results.append(result)
        return results
