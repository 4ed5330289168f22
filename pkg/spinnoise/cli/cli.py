#!/usr/bin/env python3

import argparse
import json
import sys
import traceback
from pathlib import Path
from typing import List, Optional

from spinnoise.errors.exceptions import ConfigError, CustomException, SpectrumValidationError
from spinnoise.fitting.bootstrap import bootstrap_fit
from spinnoise.helpers.config import ConfigHelper
from spinnoise.helpers.json import JsonHelper
from spinnoise.helpers.kwparser import KeyValueAction
from spinnoise.helpers.logger import logger
from spinnoise.interfaces.campaign import CellKey
from spinnoise.interfaces.config import RunConfig
from spinnoise.interfaces.probe import ProbeKind
from spinnoise.interfaces.spectrum import Channel, SpectrumMeta
from spinnoise.runner.cell import CellRunner, bootstrap_seed, cell_seed
from spinnoise.runner.run import CampaignRunner
from spinnoise.runner.selftest import CHECKS, SelfTest
from spinnoise.scaling.tables import ScalingTables
from spinnoise.store.records import RecordIO
from spinnoise.store.result_store import ResultStore

CHANNEL_CHOICES = {"dc": [Channel.DC], "rf": [Channel.RF], "both": [Channel.DC, Channel.RF]}


class CliParser(argparse.ArgumentParser):
    """Usage errors become ConfigError so they exit with the user-error code."""

    def error(self, message):
        raise ConfigError(message, {"usage": self.format_usage().strip()})


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON run document")
    common.add_argument("--seed", type=int, help="Base seed (grid.base_seed)")
    common.add_argument("--out", type=Path, help="Output directory (output_dir)")
    common.add_argument("--jobs", type=int, help="Concurrent cells")
    common.add_argument(
        "--channel", choices=sorted(CHANNEL_CHOICES), help="Lock-in channel(s) to analyse"
    )
    common.add_argument(
        "--set",
        dest="overrides",
        nargs="+",
        action=KeyValueAction,
        default={},
        metavar="KEY=VALUE",
        help="Override config keys, e.g. --set physical.b_dc=6e-6",
    )
    return common


def _cell_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--kind",
        choices=[k.value for k in ProbeKind],
        default=ProbeKind.COHERENT.value,
        help="Probe state",
    )
    parser.add_argument("--probe-power", type=float, default=1.0, help="P_pr in mW")
    parser.add_argument("--pump-power", type=float, default=0.0, help="P_pu in µW")
    parser.add_argument(
        "--polarized", action="store_true", help="Pump on (Bell-Bloom polarized ensemble)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(
        prog="spinnoise",
        description="Quantum-noise simulation and analysis for spin-precession sensors",
    )
    common = _common_flags()
    subparsers = parser.add_subparsers(title="commands", dest="command")

    # spinnoise simulate
    parser_simulate = subparsers.add_parser(
        "simulate", parents=[common], help="Integrate spin trajectories for one cell"
    )
    _cell_flags(parser_simulate)
    parser_simulate.set_defaults(func=simulate)

    # spinnoise demod
    parser_demod = subparsers.add_parser(
        "demod", parents=[common], help="Read out and demodulate into spectra"
    )
    _cell_flags(parser_demod)
    parser_demod.add_argument(
        "--input", type=Path, help="Trajectory CSV written by 'simulate' (default: simulate)"
    )
    parser_demod.set_defaults(func=demod)

    # spinnoise fit
    parser_fit = subparsers.add_parser(
        "fit", parents=[common], help="Fit and bootstrap spectrum files"
    )
    parser_fit.add_argument("inputs", nargs="+", type=Path, help="Spectrum CSV files")
    parser_fit.add_argument(
        "--kind",
        choices=[k.value for k in ProbeKind],
        help="Probe state fixing xi2 (default: from the spectrum metadata)",
    )
    parser_fit.set_defaults(func=fit)

    # spinnoise sweep
    parser_sweep = subparsers.add_parser(
        "sweep", parents=[common], help="Run the full power-sweep campaign"
    )
    parser_sweep.set_defaults(func=sweep)

    # spinnoise report
    parser_report = subparsers.add_parser(
        "report", parents=[common], help="Rebuild scaling tables from a result directory"
    )
    parser_report.add_argument(
        "--input", type=Path, help="Result directory (default: --out / output_dir)"
    )
    parser_report.set_defaults(func=report)

    # spinnoise selftest
    parser_selftest = subparsers.add_parser(
        "selftest", parents=[common], help="Run the oracle checks on the desk preset"
    )
    parser_selftest.add_argument(
        "--only",
        nargs="+",
        choices=[c.name for c in CHECKS],
        help="Run only these checks",
    )
    parser_selftest.set_defaults(func=selftest)
    return parser


def load_run_config(args) -> RunConfig:
    """Config file + --set overrides + the dedicated flags, validated together."""
    overrides = dict(args.overrides or {})
    if args.seed is not None:
        overrides["grid.base_seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.channel is not None:
        overrides["grid.channels"] = [c.value for c in CHANNEL_CHOICES[args.channel]]
    config, provenance = ConfigHelper.load_config(args.config, overrides)
    from_env = sorted(k for k, v in provenance.items() if v == "env")
    if from_env:
        logger.info(f"environment overrides: {', '.join(from_env)}")
    return config


def _cell_key(args) -> CellKey:
    return CellKey(
        ProbeKind(args.kind),
        args.probe_power,
        args.pump_power if args.polarized else 0.0,
        args.polarized,
    )


def _emit(payload) -> None:
    print(JsonHelper.dumps(payload), end="")


def simulate(args) -> int:
    """Simulates one cell and writes trajectories/trajectory.csv"""
    config = load_run_config(args)
    key = _cell_key(args)
    seed = cell_seed(config, key, 0)
    traj = CellRunner.simulate(config, key, seed)
    path = Path(config.output_dir) / "trajectories" / "trajectory.csv"
    RecordIO.write_trajectory(traj, path, {**key.as_dict(), "f_pump": config.f_pump})
    _emit({"trajectory": path.as_posix(), "samples": traj.n_samples, "excursions": traj.excursions})
    return 0


def demod(args) -> int:
    """Writes one spectrum per channel under spectra/"""
    config = load_run_config(args)
    key = _cell_key(args)
    if args.input is not None:
        traj, info = RecordIO.read_trajectory(args.input)
        key = CellKey(
            ProbeKind(info.get("kind", key.kind.value)),
            float(info.get("probe_power", key.probe_power)),
            float(info.get("pump_power", key.pump_power)),
            bool(info.get("polarized", key.polarized)),
        )
    else:
        traj = CellRunner.simulate(config, key, cell_seed(config, key, 0))
    demodulated = CellRunner.demodulate(config, CellRunner.readout(config, traj))
    meta = SpectrumMeta(
        probe_power=key.probe_power,
        pump_power=key.pump_power,
        probe_kind=key.kind.value,
        polarized=key.polarized,
        seed=traj.seed,
    )
    written = []
    for channel in config.grid.channels:
        record = CellRunner.spectrum(config, demodulated.channel(channel), channel, meta)
        path = Path(config.output_dir) / "spectra" / f"{channel.value}.csv"
        RecordIO.write_spectrum(record, path)
        written.append(path.as_posix())
    _emit({"spectra": written})
    return 0


def fit(args) -> int:
    """Fits every spectrum file and writes <name>.fit.json beside it"""
    config = load_run_config(args)
    results = []
    for path in args.inputs:
        record = RecordIO.read_spectrum(path)
        if record.n_used == 0:
            raise SpectrumValidationError(extra_info={"path": str(path)})
        kind = ProbeKind(args.kind or record.meta.probe_kind or ProbeKind.COHERENT.value)
        _, detected = config.probe_states(kind)
        key = CellKey(
            kind,
            record.meta.probe_power or 0.0,
            record.meta.pump_power or 0.0,
            bool(record.meta.polarized),
        )
        boot = bootstrap_fit(
            record,
            xi2=detected.xi2,
            n_boot=config.fit.n_boot,
            method=config.fit.bootstrap_method,
            seed=bootstrap_seed(config, key, record.channel),
            jobs=config.jobs,
            max_failed_fraction=config.fit.max_failed_fraction,
            max_iter=config.fit.max_iter,
            degenerate_pvalue=config.fit.degenerate_pvalue,
        )
        out = Path(path).with_suffix(".fit.json")
        RecordIO.write_fit(boot.point, out, boot)
        results.append({"spectrum": Path(path).as_posix(), **RecordIO.fit_document(boot.point, boot)})
    _emit(results)
    return 0


def sweep(args) -> int:
    """Runs the campaign into a result store and writes its manifest"""
    config = load_run_config(args)
    store = ResultStore(Path(config.output_dir))
    report = CampaignRunner.sweep(config, store)
    store.finalize(command="sweep", seed=config.grid.base_seed)
    _emit(
        {
            "output_dir": store.root.as_posix(),
            "cells": len(report.cells),
            "decompositions": len(report.decompositions),
            "failures": [f.as_dict() for f in report.failures],
        }
    )
    return 0


def report(args) -> int:
    """Rebuilds tables and plot files from tables/cells.csv"""
    root = args.input or args.out
    if root is None:
        root = Path(load_run_config(args).output_dir)
    store = ResultStore(root)
    config = store.read_config()
    summary = store.read_summary()
    tables = ScalingTables.build(
        summary,
        alpha=config.physical.alpha,
        exclude_top_peak_point=config.fit.exclude_top_peak_point,
    )
    store.write_tables(tables)
    store.finalize(command="report", seed=config.grid.base_seed)
    _emit({"output_dir": store.root.as_posix(), "tables": sorted(tables)})
    return 0


def selftest(args) -> int:
    """Runs the oracle suite and prints pass/fail per check"""
    results = SelfTest.run(
        seed=args.seed or 0, jobs=args.jobs or 1, only=args.only
    )
    _emit([r.as_dict() for r in results])
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(
            json.dumps({"error": "SelfTestFailure", "failed": failed, "exit_code": 2}),
            file=sys.stderr,
        )
        return 2
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            parser.print_help()
            return 1
        return args.func(args)
    except CustomException as e:
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.debug(traceback.format_exc())
        print(
            json.dumps({"error": type(e).__name__, "message": str(e), "exit_code": 2}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
