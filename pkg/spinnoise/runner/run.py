import time
import traceback
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, Iterable, List, Optional, Tuple

import pandas as pd

from spinnoise.errors.exceptions import CustomException
from spinnoise.fitting.decomposition import decompose_bootstraps
from spinnoise.helpers.logger import logger
from spinnoise.interfaces.campaign import (
    CampaignReport,
    CellFailure,
    CellKey,
    CellResult,
    DecompositionEntry,
)
from spinnoise.interfaces.config import RunConfig
from spinnoise.interfaces.fit import BootstrapResult, NoiseDecomposition
from spinnoise.interfaces.spectrum import Channel
from spinnoise.runner.cell import CellRunner
from spinnoise.scaling.tables import ScalingTables
from spinnoise.store.result_store import ResultStore


class CampaignRunner:
    @staticmethod
    def _without_reference(pol: BootstrapResult, xi2: float) -> NoiseDecomposition:
        """Polarized-only cell: the floor is still defined, the SPN/MBA split is not."""
        d = decompose_bootstraps(pol, xi2)
        nan = float("nan")
        ci = {"psn": d.ci68["psn"], "psn_floor_pol": d.ci68["psn_floor"]}
        return NoiseDecomposition(
            psn=d.psn,
            psn_floor=nan,
            spn_peak=nan,
            spn_tot=nan,
            mba_tot=nan,
            delta_f_unpol=nan,
            delta_f_pol=pol.point.model.delta_f,
            ci68=ci,
            psn_floor_pol=d.psn_floor,
            flags=d.flags,
            pol_fit=pol.point,
        )

    @staticmethod
    def decompositions(
        config: RunConfig,
        cells: List[CellResult],
        channels: Iterable[Channel],
    ) -> Tuple[List[DecompositionEntry], List[CellFailure]]:
        """
        Pair every polarized cell with the unpolarized cell of the same
        (kind, P_pr). Entries come out in grid order.
        """
        by_key: Dict[CellKey, CellResult] = {c.key: c for c in cells}
        grid = config.grid
        entries: List[DecompositionEntry] = []
        failures: List[CellFailure] = []
        for channel in channels:
            for kind in grid.probe_kinds:
                pre, detected = config.probe_states(kind)
                xi2, xibar2 = detected.xi2, pre.xibar2
                for ipr, p_pr in enumerate(grid.probe_powers):
                    unpol_key = CellKey(kind, p_pr, 0.0, False, (ipr, 0, 0))
                    unpol = by_key.get(unpol_key)
                    unpol_boot = unpol.bootstraps.get(channel) if unpol else None
                    if unpol_boot is not None:
                        entries.append(
                            DecompositionEntry(
                                channel, kind, p_pr, 0.0, decompose_bootstraps(unpol_boot, xi2)
                            )
                        )
                    if True not in grid.polarizations:
                        continue
                    for ipu, p_pu in enumerate(grid.pump_powers):
                        pol_key = CellKey(kind, p_pr, p_pu, True, (ipr, ipu, 1))
                        pol = by_key.get(pol_key)
                        pol_boot = pol.bootstraps.get(channel) if pol else None
                        if pol_boot is None:
                            continue
                        try:
                            if unpol_boot is not None:
                                d = decompose_bootstraps(unpol_boot, xi2, pol_boot, xibar2)
                            else:
                                d = CampaignRunner._without_reference(pol_boot, xi2)
                        except (CustomException, ValueError) as e:
                            failures.append(CellFailure(pol_key, "decompose", str(e), channel))
                            continue
                        entries.append(DecompositionEntry(channel, kind, p_pr, p_pu, d))
        return entries, failures

    @staticmethod
    def sweep(
        config: RunConfig,
        store: ResultStore,
        channels: Optional[Iterable[Channel]] = None,
        jobs: Optional[int] = None,
    ) -> CampaignReport:
        """Run the campaign and persist it; the caller finalizes the store."""
        store.write_config(config)
        report = CampaignRunner.run_campaign(config, channels, jobs)
        store.write_report(report)
        return report

    @staticmethod
    def to_df(report: CampaignReport) -> pd.DataFrame:
        """One row per (channel, kind, P_pr, P_pu) decomposition."""
        return report.summary_frame()

    @staticmethod
    def run_campaign(
        config: RunConfig,
        channels: Optional[Iterable[Channel]] = None,
        jobs: Optional[int] = None,
    ) -> CampaignReport:
        """
        Simulate, demodulate, fit and decompose every grid cell, then build
        the scaling tables. Failed cells are reported, not raised.

        Args:
            config: validated run document.
            channels: lock-in channels to analyse (default: config.grid.channels).
            jobs: number of cells processed concurrently (default: config.jobs).

        Returns:
            A CampaignReport whose contents depend only on config.
        """
        channels = list(channels) if channels is not None else list(config.grid.channels)
        jobs = jobs if jobs is not None else config.jobs
        keys = config.grid.cells()
        logger.info(
            f"running {len(keys)} cells x {len(channels)} channel(s) with {jobs} worker(s)"
        )
        start = time.perf_counter()

        results: List[Optional[CellResult]] = [None] * len(keys)
        failures_by_index: List[List[CellFailure]] = [[] for _ in keys]
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
            # Submit all cells and remember their grid index
            future_to_index = {
                executor.submit(CellRunner.run, config, key, channels): i
                for i, key in enumerate(keys)
            }
            for future in as_completed(future_to_index):
                index = future_to_index[future]
                try:
                    results[index], failures_by_index[index] = future.result()
                except Exception as e:
                    logger.error(f"cell {keys[index].as_dict()} raised: {e}")
                    logger.debug(traceback.format_exc())
                    failures_by_index[index] = [CellFailure(keys[index], "internal", str(e))]
                else:
                    logger.debug(f"cell {index + 1}/{len(keys)} done")

        cells = [r for r in results if r is not None]
        failures = [f for group in failures_by_index for f in group]
        entries, decomposition_failures = CampaignRunner.decompositions(config, cells, channels)
        failures.extend(decomposition_failures)

        report = CampaignReport(cells=cells, decompositions=entries, tables={}, failures=failures)
        report.tables = ScalingTables.build(
            report.summary_frame(),
            alpha=config.physical.alpha,
            exclude_top_peak_point=config.fit.exclude_top_peak_point,
        )
        elapsed = time.perf_counter() - start
        if failures:
            logger.warning(f"{len(failures)} cell stage(s) failed; see the failures table")
        logger.success(
            f"campaign finished: {len(cells)}/{len(keys)} cells, "
            f"{len(entries)} decompositions in {elapsed:.1f}s"
        )
        return report

