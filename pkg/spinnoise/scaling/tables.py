import math
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from spinnoise.errors.exceptions import CustomException
from spinnoise.helpers.logger import logger
from spinnoise.interfaces.fit import FitFlag
from spinnoise.interfaces.scaling import ScalingFit, ScalingPoint
from spinnoise.scaling.power_law import (
    db_ratio,
    db_ratio_stderr,
    estimate_exponent,
    fit_constant,
    fit_power_law,
    with_coherent_reference,
)

COHERENT = "coherent"
KIND_LABELS = {"coherent": "coh", "squeezed": "sq", "antisqueezed": "asq"}

# Read off the Lorentzian, so meaningless for a flat (degenerate) fit
ATOMIC_QUANTITIES = ("spn_peak", "spn_tot", "mba_tot", "delta_f_unpol")


def _is_degenerate(row: pd.Series) -> bool:
    flags = row.get("flags")
    return isinstance(flags, str) and FitFlag.DEGENERATE_SPECTRUM.value in flags.split(";")


def _series(df: pd.DataFrame, x: str, y: str) -> Tuple[List[ScalingPoint], int]:
    """
    Finite (x, y, σ) points and the number of rows dropped. A row is dropped
    when its σ is missing, non-finite or zero, or when `y` is an atomic
    quantity of a degenerate fit.
    """
    out = []
    dropped = 0
    for _, row in df.sort_values(x).iterrows():
        value = row[y]
        if value is None or not np.isfinite(value):
            continue
        sigma = row.get(f"{y}_sigma", float("nan"))
        if (
            sigma is None
            or not np.isfinite(sigma)
            or sigma <= 0
            or (y in ATOMIC_QUANTITIES and _is_degenerate(row))
        ):
            dropped += 1
            continue
        out.append(ScalingPoint(float(row[x]), float(value), float(sigma)))
    return out, dropped


def _points(df: pd.DataFrame, x: str, y: str) -> List[ScalingPoint]:
    return _series(df, x, y)[0]


def _safe(label: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (CustomException, ValueError, RuntimeError) as e:
        logger.warning(f"skipping {label}: {e}")
        return None


def _fit_series(
    label: str, df: pd.DataFrame, x: str, y: str, n: float
) -> Optional[ScalingFit]:
    """Power-law fit of one series; dropped rows leave a DROPPED_POINT flag."""
    points, dropped = _series(df, x, y)
    if dropped:
        logger.info(f"{label}: dropped {dropped} point(s) without a usable sigma")
    fit = _safe(label, fit_power_law, points, n)
    if fit is not None and dropped:
        fit = replace(fit, flags=[*fit.flags, FitFlag.DROPPED_POINT])
    return fit


def _fit_row(fit: ScalingFit, prefix: str = "a") -> dict:
    n = int(fit.exponent_n) if float(fit.exponent_n).is_integer() else fit.exponent_n
    return {
        f"{prefix}{n}": fit.a_n,
        f"{prefix}{n}_err": fit.stderr_a_n,
        f"{prefix}0": fit.a0,
        f"{prefix}0_err": fit.stderr_a0,
        "chi2_red": fit.reduced_chi2,
        "db_vs_coh": fit.db_vs_coherent,
        "db_err": fit.db_stderr,
        "flags": ";".join(f.value for f in fit.flags),
    }


class ScalingTables:
    """
    Builds the scaling tables from the per-cell summary frame (one row per
    channel, probe kind, P_pr and P_pu; P_pu = 0 rows are unpolarized).
    """

    @staticmethod
    def _with_references(
        fits: Dict[tuple, ScalingFit], kind_index: int = 0
    ) -> Dict[tuple, ScalingFit]:
        """Attach dB ratios against the coherent fit sharing all other key parts."""
        out = {}
        for key, fit in fits.items():
            ref_key = key[:kind_index] + (COHERENT,) + key[kind_index + 1 :]
            out[key] = with_coherent_reference(fit, fits.get(ref_key))
        return out

    @staticmethod
    def _frame(rows: List[dict], columns: List[str]) -> pd.DataFrame:
        if not rows:
            return pd.DataFrame(columns=columns)
        df = pd.DataFrame(rows)
        df["kind"] = df["kind"].map(lambda k: KIND_LABELS.get(k, k))
        return df

    @staticmethod
    def psn_vs_probe(summary: pd.DataFrame) -> pd.DataFrame:
        """Linear PSN floor fits per (kind, channel, pump, polarization)."""
        fits = {}
        for (kind, channel, pump), group in summary.groupby(
            ["kind", "channel", "pump_power"], sort=True
        ):
            column = "psn_floor" if pump == 0 else "psn_floor_pol"
            fit = _fit_series(f"PSN fit {kind}/{channel}/{pump}", group, "probe_power", column, 1)
            if fit is not None:
                fits[(kind, channel, float(pump))] = fit
        rows = [
            {
                "kind": kind,
                "channel": channel,
                "pump_power": pump,
                "polarized": pump > 0,
                **_fit_row(fit),
            }
            for (kind, channel, pump), fit in ScalingTables._with_references(fits).items()
        ]
        return ScalingTables._frame(rows, ["kind", "channel", "pump_power", "a1"])

    @staticmethod
    def psn_vs_pump(summary: pd.DataFrame, top_probe_power: float) -> pd.DataFrame:
        """Constant fits of the polarized PSN floor over pump power at fixed P_pr."""
        pol = summary[(summary["pump_power"] > 0) & np.isclose(summary["probe_power"], top_probe_power)]
        constants = {}
        slopes = {}
        for (kind, channel), group in pol.groupby(["kind", "channel"], sort=True):
            points = _points(group, "pump_power", "psn_floor_pol")
            if not points:
                continue
            constants[(kind, channel)] = fit_constant(points)
            if len(points) >= 3:
                slopes[(kind, channel)] = _safe(
                    f"PSN pump slope {kind}/{channel}", fit_power_law, points, 1
                )
        rows = []
        for (kind, channel), const in constants.items():
            row = {
                "kind": kind,
                "channel": channel,
                "probe_power": top_probe_power,
                "psn": const.value,
                "psn_err": const.stderr,
                "chi2_red": const.chi2 / const.dof if const.dof else float("nan"),
                "db_vs_coh": None,
                "db_err": None,
            }
            ref = constants.get((COHERENT, channel))
            if ref is not None and const.value > 0 and ref.value > 0:
                row["db_vs_coh"] = db_ratio(const.value, ref.value)
                row["db_err"] = db_ratio_stderr(const.value, const.stderr, ref.value, ref.stderr)
            slope = slopes.get((kind, channel))
            row["pump_slope"] = slope.a_n if slope else float("nan")
            row["pump_slope_err"] = slope.stderr_a_n if slope else float("nan")
            rows.append(row)
        return ScalingTables._frame(rows, ["kind", "channel", "psn"])

    @staticmethod
    def spn_vs_probe(summary: pd.DataFrame, exclude_top_peak_point: bool = True) -> pd.DataFrame:
        """
        Quadratic fits of the SPN peak level and total power (unpolarized).
        The peak fit drops the top probe power, where broadening flattens it.
        """
        unpol = summary[summary["pump_power"] == 0]
        peak_fits, total_fits = {}, {}
        for (kind, channel), group in unpol.groupby(["kind", "channel"], sort=True):
            peak_points, dropped = _series(group, "probe_power", "spn_peak")
            excluded = exclude_top_peak_point and len(peak_points) >= 4
            if excluded:
                peak_points = peak_points[:-1]
            peak = _safe(f"SPN peak fit {kind}/{channel}", fit_power_law, peak_points, 2)
            if peak is not None:
                extra = [FitFlag.EXCLUDED_PEAK_POINT] if excluded else []
                if dropped:
                    extra.append(FitFlag.DROPPED_POINT)
                peak = replace(peak, flags=[*peak.flags, *extra])
            total = _fit_series(f"SPN total fit {kind}/{channel}", group, "probe_power", "spn_tot", 2)
            if peak is not None:
                peak_fits[(kind, channel)] = peak
            if total is not None:
                total_fits[(kind, channel)] = total
        peak_fits = ScalingTables._with_references(peak_fits)
        total_fits = ScalingTables._with_references(total_fits)
        rows = []
        for key in sorted(set(peak_fits) | set(total_fits)):
            kind, channel = key
            row = {"kind": kind, "channel": channel}
            if key in peak_fits:
                row.update({f"peak_{k}": v for k, v in _fit_row(peak_fits[key]).items()})
            if key in total_fits:
                row.update({f"total_{k}": v for k, v in _fit_row(total_fits[key]).items()})
            rows.append(row)
        return ScalingTables._frame(rows, ["kind", "channel", "peak_a2", "total_a2"])

    @staticmethod
    def mba_vs_probe(summary: pd.DataFrame) -> pd.DataFrame:
        """Cubic fits of the MBA total power per pump power."""
        pol = summary[summary["pump_power"] > 0]
        fits = {}
        for (kind, channel, pump), group in pol.groupby(
            ["kind", "channel", "pump_power"], sort=True
        ):
            fit = _fit_series(
                f"MBA cubic fit {kind}/{channel}/{pump}", group, "probe_power", "mba_tot", 3
            )
            if fit is not None:
                fits[(kind, channel, float(pump))] = fit
        rows = [
            {"kind": kind, "channel": channel, "pump_power": pump, **_fit_row(fit)}
            for (kind, channel, pump), fit in ScalingTables._with_references(fits).items()
        ]
        return ScalingTables._frame(rows, ["kind", "channel", "pump_power", "a3"])

    @staticmethod
    def mba_vs_pump(summary: pd.DataFrame, top_probe_power: float) -> pd.DataFrame:
        """Quadratic fits of the MBA total power over pump power at fixed P_pr."""
        pol = summary[(summary["pump_power"] > 0) & np.isclose(summary["probe_power"], top_probe_power)]
        fits = {}
        for (kind, channel), group in pol.groupby(["kind", "channel"], sort=True):
            fit = _fit_series(f"MBA pump fit {kind}/{channel}", group, "pump_power", "mba_tot", 2)
            if fit is not None:
                fits[(kind, channel)] = fit
        rows = [
            {"kind": kind, "channel": channel, "probe_power": top_probe_power, **_fit_row(fit)}
            for (kind, channel), fit in ScalingTables._with_references(fits).items()
        ]
        return ScalingTables._frame(rows, ["kind", "channel", "a2"])

    @staticmethod
    def exponents(summary: pd.DataFrame) -> pd.DataFrame:
        """Free-exponent estimates for every scaling series with >= 4 points."""
        series = []
        unpol = summary[summary["pump_power"] == 0]
        pol = summary[summary["pump_power"] > 0]
        for (kind, channel), group in unpol.groupby(["kind", "channel"], sort=True):
            series.append(("psn_floor", kind, channel, 0.0, _points(group, "probe_power", "psn_floor"), 1))
            series.append(("spn_tot", kind, channel, 0.0, _points(group, "probe_power", "spn_tot"), 2))
        for (kind, channel, pump), group in pol.groupby(["kind", "channel", "pump_power"], sort=True):
            series.append(("psn_floor_pol", kind, channel, float(pump), _points(group, "probe_power", "psn_floor_pol"), 1))
            series.append(("mba_tot", kind, channel, float(pump), _points(group, "probe_power", "mba_tot"), 3))
        rows = []
        for quantity, kind, channel, pump, points, expected in series:
            if len(points) < 4:
                continue
            est = _safe(f"exponent {quantity} {kind}/{channel}/{pump}", estimate_exponent, points)
            if est is None:
                continue
            rows.append(
                {
                    "quantity": quantity,
                    "kind": kind,
                    "channel": channel,
                    "pump_power": pump,
                    "expected": expected,
                    "exponent": est.value,
                    "exponent_err": est.stderr,
                    "loglog_slope": est.slope,
                    "nonlinear_n": est.nonlinear_n,
                    "nonlinear_n_err": est.nonlinear_n_stderr,
                    "a0": est.a0,
                    "slope_defined": est.slope_defined,
                }
            )
        return ScalingTables._frame(rows, ["quantity", "kind", "channel", "exponent"])

    @staticmethod
    def linewidth(summary: pd.DataFrame, alpha: Optional[float] = None) -> pd.DataFrame:
        """Affine fit of the unpolarized linewidth Δf against P_pr."""
        unpol = summary[summary["pump_power"] == 0]
        rows = []
        for (kind, channel), group in unpol.groupby(["kind", "channel"], sort=True):
            fit = _fit_series(
                f"linewidth fit {kind}/{channel}", group, "probe_power", "delta_f_unpol", 1
            )
            if fit is None:
                continue
            rows.append(
                {
                    "kind": kind,
                    "channel": channel,
                    "slope": fit.a_n,
                    "slope_err": fit.stderr_a_n,
                    "intercept": fit.a0,
                    "intercept_err": fit.stderr_a0,
                    "expected_slope": alpha / (2 * math.pi) if alpha is not None else float("nan"),
                    "chi2_red": fit.reduced_chi2,
                    "flags": ";".join(f.value for f in fit.flags),
                }
            )
        return ScalingTables._frame(rows, ["kind", "channel", "slope"])

    @staticmethod
    def channel_agreement(exponents: pd.DataFrame, n_sigma: float = 2.0) -> pd.DataFrame:
        """
        Pair the dc and rf exponent of every (quantity, kind, pump) series.
        A pair agrees when the difference is within `n_sigma` combined
        standard errors.
        """
        columns = ["quantity", "kind", "pump_power"]
        if exponents.empty:
            return pd.DataFrame(columns=columns + ["difference", "agree"])
        dc = exponents[exponents["channel"] == "dc"]
        rf = exponents[exponents["channel"] == "rf"]
        keep = columns + ["exponent", "exponent_err"]
        pairs = dc[keep].merge(rf[keep], on=columns, suffixes=("_dc", "_rf"))
        pairs["difference"] = pairs["exponent_dc"] - pairs["exponent_rf"]
        pairs["tolerance"] = n_sigma * np.hypot(pairs["exponent_err_dc"], pairs["exponent_err_rf"])
        pairs["agree"] = np.isfinite(pairs["tolerance"]) & (
            pairs["difference"].abs() <= pairs["tolerance"]
        )
        return pairs.sort_values(columns, ignore_index=True)

    @staticmethod
    def plot_series(summary: pd.DataFrame, top_probe_power: float) -> pd.DataFrame:
        """Long-format XY data for the probe- and pump-scaling panels."""
        panels = [
            ("psn_vs_probe", summary[summary["pump_power"] == 0], "probe_power", "psn_floor"),
            ("psn_pol_vs_probe", summary[summary["pump_power"] > 0], "probe_power", "psn_floor_pol"),
            ("spn_peak_vs_probe", summary[summary["pump_power"] == 0], "probe_power", "spn_peak"),
            ("spn_total_vs_probe", summary[summary["pump_power"] == 0], "probe_power", "spn_tot"),
            ("mba_total_vs_probe", summary[summary["pump_power"] > 0], "probe_power", "mba_tot"),
            (
                "mba_total_vs_pump",
                summary[(summary["pump_power"] > 0) & np.isclose(summary["probe_power"], top_probe_power)],
                "pump_power",
                "mba_tot",
            ),
        ]
        frames = []
        for panel, df, x, y in panels:
            if df.empty:
                continue
            frames.append(
                pd.DataFrame(
                    {
                        "panel": panel,
                        "kind": df["kind"].map(lambda k: KIND_LABELS.get(k, k)),
                        "channel": df["channel"],
                        "pump_power": df["pump_power"],
                        "probe_power": df["probe_power"],
                        "x": df[x],
                        "y": df[y],
                        "sigma": df.get(f"{y}_sigma"),
                    }
                )
            )
        if not frames:
            return pd.DataFrame(columns=["panel", "x", "y", "sigma"])
        return pd.concat(frames, ignore_index=True)

    @staticmethod
    def build(
        summary: pd.DataFrame,
        alpha: Optional[float] = None,
        exclude_top_peak_point: bool = True,
    ) -> Dict[str, pd.DataFrame]:
        if summary.empty:
            logger.warning("no decompositions available; scaling tables are empty")
            return {}
        top = float(summary["probe_power"].max())
        tables = {
            "psn_vs_probe": ScalingTables.psn_vs_probe(summary),
            "psn_vs_pump": ScalingTables.psn_vs_pump(summary, top),
            "spn_vs_probe": ScalingTables.spn_vs_probe(summary, exclude_top_peak_point),
            "mba_vs_probe": ScalingTables.mba_vs_probe(summary),
            "mba_vs_pump": ScalingTables.mba_vs_pump(summary, top),
            "exponents": ScalingTables.exponents(summary),
            "linewidth": ScalingTables.linewidth(summary, alpha),
            "plot_xy": ScalingTables.plot_series(summary, top),
        }
        logger.info(
            "built scaling tables: "
            + ", ".join(f"{name}({len(df)})" for name, df in tables.items())
        )
        return tables
