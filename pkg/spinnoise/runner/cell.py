import traceback
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from spinnoise.dsp.lockin import lockin_demodulate
from spinnoise.dsp.masking import limit_band, mask_technical_peaks
from spinnoise.dsp.welch import welch_psd
from spinnoise.errors.exceptions import CustomException
from spinnoise.fitting.bootstrap import bootstrap_fit
from spinnoise.helpers.logger import logger
from spinnoise.helpers.seed_helper import SeedHelper
from spinnoise.interfaces.campaign import CellFailure, CellKey, CellResult
from spinnoise.interfaces.config import RunConfig
from spinnoise.interfaces.fit import FitFlag
from spinnoise.interfaces.physics import Trajectory
from spinnoise.interfaces.probe import StokesSample
from spinnoise.interfaces.spectrum import (
    Channel,
    DemodChannels,
    SpectrumMeta,
    SpectrumRecord,
    TimeSeries,
)
from spinnoise.readout.polarimeter import polarimeter_readout
from spinnoise.simulation.trajectory import simulate_trajectory

# Seed-index tags for streams that are not trajectory replicates
BOOTSTRAP_STREAM = 1 << 16
CHANNEL_STREAM = {Channel.DC: 0, Channel.RF: 1}


def cell_seed(config: RunConfig, key: CellKey, replicate: int) -> int:
    """Integer trajectory seed of one replicate of one cell."""
    seq = SeedHelper.cell_sequence(config.grid.base_seed, [*key.seed_index, replicate])
    return int(seq.generate_state(1)[0])


def bootstrap_seed(config: RunConfig, key: CellKey, channel: Channel):
    return SeedHelper.cell_sequence(
        config.grid.base_seed,
        [*key.seed_index, BOOTSTRAP_STREAM + CHANNEL_STREAM[channel]],
    )


class CellRunner:
    """
    The per-cell pipeline: simulate → polarimeter → lock-in → Welch →
    mask → fit. Each stage is usable on its own by the CLI.
    """

    @staticmethod
    def simulate(config: RunConfig, key: CellKey, seed: int) -> Trajectory:
        pre, detected = config.probe_states(key.kind)
        det = config.detector
        return simulate_trajectory(
            config.physical,
            config.drive_for(key),
            config.trajectory_config(seed),
            probe=pre,
            kappa=det.shot_noise_constant,
            detected=detected,
            s1=det.s1(key.probe_power),
        )

    @staticmethod
    def readout(config: RunConfig, traj: Trajectory) -> TimeSeries:
        stokes = StokesSample(
            s1=traj.s1,
            s2_noise=traj.s2_out,
            s3_noise=traj.s3_in,
            f_s=traj.sample_rate,
            t0=float(traj.t[0]) if traj.n_samples else 0.0,
        )
        return polarimeter_readout(traj.component("z"), stokes, config.detector)

    @staticmethod
    def demodulate(config: RunConfig, v: TimeSeries) -> DemodChannels:
        return lockin_demodulate(
            v,
            f_ref=config.f_pump,
            phase_ref=config.drive.pump_phase,
            lp_cutoff=config.lp_cutoff,
            decim=config.dsp.decim,
        )

    @staticmethod
    def spectrum(
        config: RunConfig,
        series: TimeSeries,
        channel: Channel,
        meta: Optional[SpectrumMeta] = None,
    ) -> SpectrumRecord:
        dsp = config.dsp
        record = welch_psd(
            series,
            segment_len=dsp.segment_len,
            overlap=dsp.overlap,
            window=dsp.window,
            detrend="constant",
            channel=channel,
            meta=meta,
        )
        record = mask_technical_peaks(record, dsp.mask_bands)
        return limit_band(record, dsp.f_min, config.f_max)

    @staticmethod
    def spectra(
        config: RunConfig, key: CellKey, channels: Iterable[Channel]
    ) -> Tuple[Dict[Channel, SpectrumRecord], int]:
        """Replicate-averaged spectra of one cell and the total soft-bound excursions."""
        channels = list(channels)
        per_channel: Dict[Channel, List[SpectrumRecord]] = {c: [] for c in channels}
        excursions = 0
        for replicate in range(config.grid.replicates):
            seed = cell_seed(config, key, replicate)
            traj = CellRunner.simulate(config, key, seed)
            excursions += traj.excursions
            demod = CellRunner.demodulate(config, CellRunner.readout(config, traj))
            meta = SpectrumMeta(
                probe_power=key.probe_power,
                pump_power=key.pump_power,
                probe_kind=key.kind.value,
                polarized=key.polarized,
                seed=seed,
            )
            for channel in channels:
                per_channel[channel].append(
                    CellRunner.spectrum(config, demod.channel(channel), channel, meta)
                )
        return {c: SpectrumRecord.average(r) for c, r in per_channel.items()}, excursions

    @staticmethod
    def run(
        config: RunConfig, key: CellKey, channels: Iterable[Channel], jobs: int = 1
    ) -> Tuple[Optional[CellResult], List[CellFailure]]:
        """
        Run one cell. The result lacks every channel whose fit failed and is
        None when no channel survived; failures are returned alongside.
        """
        channels = list(channels)
        failures: List[CellFailure] = []
        try:
            spectra, excursions = CellRunner.spectra(config, key, channels)
        except (CustomException, ValueError, FloatingPointError) as e:
            logger.error(f"cell {key.as_dict()} failed during simulation: {e}")
            logger.debug(traceback.format_exc())
            return None, [CellFailure(key, "simulate", str(e))]

        result = CellResult(key=key, spectra=spectra, excursions=excursions)
        _, detected = config.probe_states(key.kind)
        fit_kwargs = dict(
            max_iter=config.fit.max_iter,
            degenerate_pvalue=config.fit.degenerate_pvalue,
        )
        for channel, record in spectra.items():
            try:
                boot = bootstrap_fit(
                    record,
                    xi2=detected.xi2,
                    n_boot=config.fit.n_boot,
                    method=config.fit.bootstrap_method,
                    seed=bootstrap_seed(config, key, channel),
                    jobs=jobs,
                    max_failed_fraction=config.fit.max_failed_fraction,
                    **fit_kwargs,
                )
            except (CustomException, ValueError, np.linalg.LinAlgError) as e:
                logger.error(f"fit of {channel.value} {key.as_dict()} failed: {e}")
                failures.append(CellFailure(key, "fit", str(e), channel))
                continue
            if excursions and FitFlag.BOUND_EXCURSION not in boot.point.flags:
                boot.point.flags.append(FitFlag.BOUND_EXCURSION)
            result.fits[channel] = boot.point
            result.bootstraps[channel] = boot

        return (result if result.fits else None), failures
