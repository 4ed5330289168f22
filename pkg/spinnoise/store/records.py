import dataclasses
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from spinnoise.errors.exceptions import SpectrumValidationError
from spinnoise.helpers.constants import CSV_FLOAT_FORMAT
from spinnoise.helpers.json import JsonHelper
from spinnoise.interfaces.fit import (
    BootstrapResult,
    FitFlag,
    FitResult,
    NoiseFitModel,
)
from spinnoise.interfaces.physics import Trajectory
from spinnoise.interfaces.spectrum import Channel, SpectrumMeta, SpectrumRecord

TRAJECTORY_COLUMNS = ["trajectory", "t", "Fx", "Fy", "Fz", "S2_out", "S3_in"]
SPECTRUM_COLUMNS = ["freq", "psd", "mask"]


def write_csv(df: pd.DataFrame, path: Path) -> None:
    """Deterministic CSV: bit-exact floats, LF line endings, no index."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def _sidecar(path: Path) -> Path:
    return Path(path).with_suffix(".json")


class RecordIO:
    """CSV + JSON sidecar codecs for the artifacts of a run."""

    @staticmethod
    def write_spectrum(record: SpectrumRecord, path: Path) -> None:
        write_csv(
            pd.DataFrame(
                {
                    "freq": record.freqs,
                    "psd": record.psd,
                    "mask": record.mask.astype(int),
                }
            ),
            path,
        )
        JsonHelper.write(
            _sidecar(path),
            {"channel": record.channel, "meta": dataclasses.asdict(record.meta)},
        )

    @staticmethod
    def read_spectrum(path: Path) -> SpectrumRecord:
        path = Path(path)
        try:
            df = read_csv(path)
        except (OSError, pd.errors.ParserError) as e:
            raise SpectrumValidationError(f"cannot read spectrum: {e}", {"path": str(path)}) from e
        missing = [c for c in SPECTRUM_COLUMNS if c not in df.columns]
        if missing:
            raise SpectrumValidationError(
                "spectrum file lacks required columns", {"missing": missing}
            )
        sidecar = _sidecar(path)
        channel, meta = Channel.DC, SpectrumMeta()
        if sidecar.exists():
            info = JsonHelper.read(sidecar)
            channel = Channel(info.get("channel", "dc"))
            meta = SpectrumMeta(**info.get("meta", {}))
        return SpectrumRecord(
            freqs=df["freq"].to_numpy(dtype=float),
            psd=df["psd"].to_numpy(dtype=float),
            mask=df["mask"].to_numpy().astype(bool),
            channel=channel,
            meta=meta,
        )

    @staticmethod
    def write_trajectory(traj: Trajectory, path: Path, info: Optional[dict] = None) -> None:
        K, n = traj.F.shape[0], traj.F.shape[1]
        write_csv(
            pd.DataFrame(
                {
                    "trajectory": np.repeat(np.arange(K), n),
                    "t": np.tile(traj.t, K),
                    "Fx": traj.F[..., 0].ravel(),
                    "Fy": traj.F[..., 1].ravel(),
                    "Fz": traj.F[..., 2].ravel(),
                    "S2_out": traj.s2_out.ravel(),
                    "S3_in": traj.s3_in.ravel(),
                }
            ),
            path,
        )
        JsonHelper.write(
            _sidecar(path),
            {
                "s1": traj.s1,
                "dt": traj.dt,
                "seed": traj.seed,
                "excursions": traj.excursions,
                **(info or {}),
            },
        )

    @staticmethod
    def read_trajectory(path: Path) -> Tuple[Trajectory, dict]:
        path = Path(path)
        df = read_csv(path)
        missing = [c for c in TRAJECTORY_COLUMNS if c not in df.columns]
        if missing:
            raise SpectrumValidationError(
                "trajectory file lacks required columns", {"missing": missing}
            )
        info = JsonHelper.read(_sidecar(path))
        K = int(df["trajectory"].max()) + 1
        n = len(df) // K

        def column(name):
            return df[name].to_numpy(dtype=float).reshape(K, n)

        F = np.stack([column("Fx"), column("Fy"), column("Fz")], axis=-1)
        traj = Trajectory(
            t=df["t"].to_numpy(dtype=float)[:n],
            F=F,
            s1=float(info["s1"]),
            s2_out=column("S2_out"),
            s3_in=column("S3_in"),
            dt=float(info["dt"]),
            excursions=int(info.get("excursions", 0)),
            seed=info.get("seed"),
        )
        return traj, info

    @staticmethod
    def fit_document(fit: FitResult, boot: Optional[BootstrapResult] = None) -> dict:
        doc = {"fit": fit.to_dict()}
        if boot is not None:
            doc["bootstrap"] = {
                "method": boot.method,
                "n_boot": boot.n_boot,
                "n_failed": boot.n_failed,
                "percentiles": {k: list(v) for k, v in boot.percentiles.items()},
            }
        return doc

    @staticmethod
    def write_fit(fit: FitResult, path: Path, boot: Optional[BootstrapResult] = None) -> None:
        JsonHelper.write(path, RecordIO.fit_document(fit, boot))

    @staticmethod
    def read_fit(path: Path) -> FitResult:
        doc = JsonHelper.read(path)["fit"]
        to_float = JsonHelper.to_float
        return FitResult(
            model=NoiseFitModel(
                s_psn=to_float(doc["s_psn"]),
                s_atomic=to_float(doc["s_atomic"]),
                delta_f=to_float(doc["delta_f"]),
                xi2=to_float(doc["xi2"]),
            ),
            loglik=to_float(doc["loglik"]),
            n_used=int(doc["n_used"]),
            cov=np.array(
                [[to_float(v) for v in row] for row in doc["cov"]], dtype=float
            ),
            flags=[FitFlag(f) for f in doc.get("flags", [])],
            reduced_chi2=to_float(doc.get("reduced_chi2", "nan")),
        )
