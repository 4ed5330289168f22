import hashlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from spinnoise.helpers.config import ConfigHelper
from spinnoise.helpers.constants import (
    CONFIG_ECHO_FILE_NAME,
    MANIFEST_FILE_NAME,
    RUN_INFO_FILE_NAME,
)
from spinnoise.helpers.json import JsonHelper
from spinnoise.helpers.logger import logger
from spinnoise.interfaces.campaign import CampaignReport, CellKey
from spinnoise.interfaces.config import RunConfig
from spinnoise.interfaces.spectrum import Channel, SpectrumRecord
from spinnoise.store.records import RecordIO, read_csv, write_csv

CELLS_DIR = "cells"
TABLES_DIR = "tables"
PLOTS_DIR = "plots"
DECOMPOSITIONS_FILE_NAME = "decompositions.json"
SPECTRUM_FILE_NAME = "spectrum.csv"
FIT_FILE_NAME = "fit.json"

# Files that describe the run rather than its results
UNLISTED = {MANIFEST_FILE_NAME, RUN_INFO_FILE_NAME}

# Where and how fast a run executes; kept out of the echoed config
RUN_LOCAL_KEYS = {"output_dir", "jobs"}


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


class ResultStore:
    """
    Result directory of one run:

        config.yaml
        cells/<channel>/<kind>/pu<P_pu>/pr<P_pr>/<pol|unpol>/{spectrum.csv,spectrum.json,fit.json}
        decompositions.json
        tables/<table>.csv
        plots/<panel>.csv
        manifest.json      (sorted paths, sizes and SHA-256 of every file above)
        run_info.json      (timestamp and command; not in the manifest)

    Every listed file depends on the config alone.
    """

    def __init__(self, root: Path):
        self.root = Path(root)

    def cell_dir(self, key: CellKey, channel: Channel) -> Path:
        return self.root.joinpath(CELLS_DIR, *key.path_parts(channel))

    def write_config(self, config: RunConfig) -> Path:
        path = self.root / CONFIG_ECHO_FILE_NAME
        ConfigHelper.save_config(config, path, exclude=RUN_LOCAL_KEYS)
        return path

    def write_spectrum(self, record: SpectrumRecord, key: CellKey) -> Path:
        path = self.cell_dir(key, record.channel) / SPECTRUM_FILE_NAME
        RecordIO.write_spectrum(record, path)
        return path

    def write_table(self, name: str, df: pd.DataFrame) -> Path:
        path = self.root / TABLES_DIR / f"{name}.csv"
        write_csv(df, path)
        return path

    def write_plots(self, plot_xy: pd.DataFrame) -> List[Path]:
        paths = []
        if plot_xy.empty:
            return paths
        for panel, df in plot_xy.groupby("panel", sort=True):
            path = self.root / PLOTS_DIR / f"{panel}.csv"
            write_csv(df.drop(columns=["panel"]).reset_index(drop=True), path)
            paths.append(path)
        return paths

    def write_report(self, report: CampaignReport) -> None:
        """Persist spectra, fits, decompositions and tables of a campaign."""
        for cell in report.cells:
            for channel, record in cell.spectra.items():
                self.write_spectrum(record, cell.key)
                if channel in cell.fits:
                    RecordIO.write_fit(
                        cell.fits[channel],
                        self.cell_dir(cell.key, channel) / FIT_FILE_NAME,
                        cell.bootstraps.get(channel),
                    )
        JsonHelper.write(
            self.root / DECOMPOSITIONS_FILE_NAME,
            [
                {
                    "channel": e.channel,
                    "kind": e.kind,
                    "probe_power": e.probe_power,
                    "pump_power": e.pump_power,
                    **e.decomposition.to_dict(),
                }
                for e in report.decompositions
            ],
        )
        self.write_tables(report.to_frames())

    def write_tables(self, frames: Dict[str, pd.DataFrame]) -> None:
        for name, df in frames.items():
            if name == "plot_xy":
                self.write_plots(df)
            else:
                self.write_table(name, df)

    def read_summary(self) -> pd.DataFrame:
        """Per-cell decomposition rows written by a previous sweep."""
        return read_csv(self.root / TABLES_DIR / "cells.csv")

    def read_config(self) -> RunConfig:
        """The echoed config, with output_dir pointing at this directory."""
        config, _ = ConfigHelper.load_config(self.root / CONFIG_ECHO_FILE_NAME)
        return config.model_copy(update={"output_dir": self.root.as_posix()})

    def spectrum_files(self) -> List[Path]:
        return sorted((self.root / CELLS_DIR).rglob(SPECTRUM_FILE_NAME))

    def manifest(self) -> List[dict]:
        entries = []
        for path in sorted(p for p in self.root.rglob("*") if p.is_file()):
            rel = path.relative_to(self.root).as_posix()
            if rel in UNLISTED:
                continue
            entries.append(
                {"path": rel, "size": path.stat().st_size, "sha256": sha256_file(path)}
            )
        return entries

    def finalize(self, command: str, seed: Optional[int] = None) -> Path:
        """Write run_info.json and, last of all, the manifest."""
        JsonHelper.write(
            self.root / RUN_INFO_FILE_NAME,
            {
                "command": command,
                "seed": seed,
                "timestamp": datetime.now(timezone.utc).isoformat(),
            },
        )
        entries = self.manifest()
        path = self.root / MANIFEST_FILE_NAME
        JsonHelper.write(path, {"files": entries})
        logger.info(f"wrote {len(entries)} artifacts to {self.root}")
        return path

    def verify(self) -> List[str]:
        """Paths whose size or checksum no longer match the manifest."""
        listed = JsonHelper.read(self.root / MANIFEST_FILE_NAME)["files"]
        bad = []
        for entry in listed:
            path = self.root / entry["path"]
            if not path.exists() or sha256_file(path) != entry["sha256"]:
                bad.append(entry["path"])
        return bad
