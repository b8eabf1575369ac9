"""Command-line front end: simulate, estimate, calibrate, diagnose and report.

Exit codes: 0 when everything requested succeeded, 1 when some grid cells or
diagnostics failed (listed in ``errors.json``), 2 on configuration, data or
model errors.
"""

import argparse
import dataclasses
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from rich.console import Console
from rich.logging import RichHandler

from .. import __version__
from ..config import apply_overrides, load_config
from ..config.loader import CellConfig, resolve_cell
from ..core.errors import ConfigError, KinkWelfareError, WelfareError
from ..core.rkd import RkdFit, binned_means, covariate_smoothness, density_test
from ..core.synth import (
    export_dataset,
    load_analysis_frame,
    simulate_population,
    to_frame,
)
from ..core.welfare import (
    WelfareInputs,
    calibrate_table,
    inputs_from_fits,
)
from ..runtime import GridRunner, write_text_atomic
from ..stdlib.published import published_inputs
from . import tables

logger = logging.getLogger("kinkwelfare")

EXIT_OK = 0
EXIT_CELL_FAILURES = 1
EXIT_ERROR = 2


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Install a single RichHandler on the package logger."""
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(
        console=Console(stderr=True), show_time=False, show_path=False
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logger.setLevel(level)
    logger.propagate = False


def _bandwidth(value: str):
    if value in ("fg", "mse"):
        return value
    try:
        h = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"bandwidth must be fg, mse or a number, got {value}"
        )
    if h <= 0:
        raise argparse.ArgumentTypeError("bandwidth must be positive")
    return h


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--jobs", type=int, help="worker threads")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="warnings only")

    parser = argparse.ArgumentParser(
        prog="kinkwelfare",
        description="UI benefit kinks: simulation, RKD estimation and welfare.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser(
        "simulate", parents=[common], help="simulate a spell dataset"
    )
    simulate.add_argument("--data", help="dataset file to write")
    simulate.add_argument("--n", type=int, dest="n_workers", help="number of spells")
    simulate.add_argument("--regime", choices=["pre", "post", "both"])

    estimate = commands.add_parser(
        "estimate", parents=[common], help="run the estimation grid"
    )
    estimate.add_argument("--data", help="dataset file")
    estimate.add_argument("--kink", choices=["low", "high"])
    estimate.add_argument("--regime", choices=["pre", "post", "pooled"])
    estimate.add_argument("--bandwidth", type=_bandwidth)
    estimate.add_argument("--poly", type=int, choices=[1, 2])
    estimate.add_argument("--controls", action=argparse.BooleanOptionalAction)
    estimate.add_argument("--method", choices=["sharp", "fuzzy"])

    calibrate = commands.add_parser(
        "calibrate", parents=[common], help="evaluate the welfare formula"
    )
    calibrate.add_argument(
        "--published", action="store_true", help="use the published input rows"
    )
    calibrate.add_argument("--fits", help="fits file from estimate")
    calibrate.add_argument("--wage-fit", help="single log-wage fit (JSON)")
    calibrate.add_argument("--ui-fit", help="single total-UI-paid fit (JSON)")
    calibrate.add_argument("--delta", type=float, help="separation rate")

    diagnose = commands.add_parser(
        "diagnose", parents=[common], help="binned means and validity checks"
    )
    diagnose.add_argument("--data", help="dataset file")
    diagnose.add_argument("--bins", type=float, dest="bin_width", help="bin width")
    diagnose.add_argument("--kink", choices=["low", "high"])
    diagnose.add_argument("--regime", choices=["pre", "post"])

    report = commands.add_parser(
        "report", parents=[common], help="tabulate fits as CSV"
    )
    report.add_argument("--fits", help="fits file from estimate")
    return parser


class App:
    """Runs one parsed command."""

    def __init__(self, args: argparse.Namespace, console: Optional[Console] = None):
        self.args = args
        self.console = console or Console(quiet=args.quiet)
        self.failures: List[Dict[str, Any]] = []
        config = load_config(args.config)
        self.config = apply_overrides(
            config,
            seed=args.seed,
            jobs=args.jobs,
            out=args.out,
            data=getattr(args, "data", None),
            **self._cell_overrides(args),
        )
        self.out = Path(self.config.io.out)

    @staticmethod
    def _cell_overrides(args: argparse.Namespace) -> Dict[str, Any]:
        if args.command == "estimate":
            return {
                "kink": args.kink,
                "regime": args.regime,
                "bandwidth": args.bandwidth,
                "poly": args.poly,
                "controls": args.controls,
                "method": args.method,
            }
        if args.command == "simulate":
            return {"n_workers": args.n_workers}
        if args.command == "calibrate":
            return {"delta": args.delta}
        return {}

    def run(self) -> int:
        handler = getattr(self, f"cmd_{self.args.command}")
        handler()
        if self.failures:
            self._write_json(self.out / "errors.json", {"failures": self.failures})
            return EXIT_CELL_FAILURES
        return EXIT_OK

    # Commands

    def cmd_simulate(self):
        sim = self.config.sim
        if self.args.regime:
            sim = dataclasses.replace(sim, regime=self.args.regime)
        records = simulate_population(sim, self.config.schedule, self.config.model)
        target = Path(self.config.io.data or self.out / "spells.csv")
        export_dataset(records, target)
        summary = tables.summary_frame(to_frame(records), self.config.schedule)
        self._write_csv(self.out / "summary.csv", summary)
        tables.render(self.console, summary, f"Simulated spells ({len(records)})")

    def cmd_estimate(self):
        specs = self.config.specs()
        if not specs:
            raise ConfigError("estimation grid is empty")
        data = self._data()
        runner = GridRunner(jobs=self.config.sim.jobs)
        results = runner.run(data, specs)
        fits = [r.fit for r in results if r.ok]
        self.failures.extend(r.failure_record() for r in results if not r.ok)
        self._write_json(
            self.out / "fits.json", {"fits": [r.record() for r in results]}
        )
        stats = runner.get_statistics()
        logger.info("%d of %d cells succeeded", stats.succeeded, stats.total)
        tables.render(self.console, tables.report_frame(fits), "RKD estimates")

    def cmd_calibrate(self):
        delta = self.config.welfare.delta
        if self.args.published:
            panels = self.config.welfare.published_panels or [""]
            inputs = [row for panel in panels for row in published_inputs(panel)]
            if self.args.delta is not None:
                inputs = [_with_delta(row, delta) for row in inputs]
            results = calibrate_table(inputs)
        else:
            wage_fit, ui_fit = self._calibration_fits()
            inputs = [inputs_from_fits(wage_fit, ui_fit, delta)]
            results = calibrate_table(inputs)
        frame = tables.welfare_frame(inputs, results)
        self._write_json(
            self.out / "welfare.json",
            {
                "results": [
                    {**given.to_dict(), **result.to_dict()}
                    for given, result in zip(inputs, results)
                ]
            },
        )
        self._write_csv(self.out / "welfare.csv", frame)
        tables.render(self.console, frame, "Welfare formula")

    def cmd_diagnose(self):
        settings = self.config.diagnose
        kink = self.args.kink or settings.kink
        regime = self.args.regime or settings.regime
        bin_width = self.args.bin_width or settings.bin_width
        data = self._data()
        data = data[data["regime"] == regime]
        base = CellConfig(
            label="diagnose",
            outcome=settings.outcomes[0] if settings.outcomes else "total_ui_paid",
            kink=kink,
            regime=regime,
            method="sharp",
            exclude_other_kink=False,
        )
        spec = resolve_cell(base, self.config.schedule)
        anchor = spec.kink_point

        counts = binned_means(
            data.assign(one=1.0), spec.running, "one", bin_width, anchor=anchor
        )
        self._write_csv(
            self.out / "bins_density.csv",
            counts[["bin_center", "count"]],
        )
        for outcome in ["initial_benefit", *settings.outcomes]:
            trim = settings.trim if outcome in settings.trim_outcomes else None
            bins = binned_means(
                data, spec.running, outcome, bin_width, anchor=anchor, trim=trim
            )
            self._write_csv(self.out / f"bins_{outcome}.csv", bins)

        checks: Dict[str, Any] = {}
        self._check(
            checks,
            "density",
            lambda: density_test(data, spec.with_changes(label="density"), bin_width),
        )
        for outcome in settings.outcomes:
            self._check(
                checks,
                f"smoothness/{outcome}",
                lambda outcome=outcome: covariate_smoothness(
                    data,
                    settings.covariates,
                    outcome,
                    spec.with_changes(label=f"smoothness/{outcome}"),
                ),
            )
        self._write_json(self.out / "diagnostics.json", checks)
        fits = [RkdFit.from_dict(record) for record in checks.values()]
        tables.render(self.console, tables.report_frame(fits), "Diagnostics")

    def cmd_report(self):
        fits = self._read_fits(self._fits_path())
        frame = tables.report_frame(fits)
        self._write_csv(self.out / "report.csv", frame)
        tables.render(self.console, frame, "RKD estimates")

    # Helpers

    def _check(self, checks: Dict[str, Any], name: str, compute):
        try:
            checks[name] = compute().to_dict()
        except KinkWelfareError as e:
            logger.error("diagnostic %s failed: %s", name, e)
            self.failures.append(
                {"label": name, "error_type": type(e).__name__, "error": str(e)}
            )

    def _data(self) -> pd.DataFrame:
        if not self.config.io.data:
            raise KinkWelfareError("no dataset given (use --data or io.data)")
        return load_analysis_frame(self.config.io.data, self.config.schedule)

    def _fits_path(self) -> Path:
        return Path(self.args.fits) if self.args.fits else self.out / "fits.json"

    def _read_fits(self, path: Path) -> List[RkdFit]:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        records = payload.get("fits", [])
        fits = [RkdFit.from_dict(r) for r in records if "error" not in r]
        if len(fits) < len(records):
            skipped = len(records) - len(fits)
            logger.info("skipping %d failed cells in %s", skipped, path)
        return fits

    def _calibration_fits(self):
        if self.args.wage_fit or self.args.ui_fit:
            if not (self.args.wage_fit and self.args.ui_fit):
                raise WelfareError("--wage-fit and --ui-fit go together")
            return (
                RkdFit.from_dict(_read_json(self.args.wage_fit)),
                RkdFit.from_dict(_read_json(self.args.ui_fit)),
            )
        by_label = {fit.label: fit for fit in self._read_fits(self._fits_path())}
        welfare = self.config.welfare
        wanted = (welfare.wage_cell, welfare.ui_cell)
        missing = [label for label in wanted if label not in by_label]
        if missing:
            raise WelfareError(f"fits file has no cells labeled {missing}")
        return by_label[welfare.wage_cell], by_label[welfare.ui_cell]

    def _write_json(self, path: Path, payload: Any):
        write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        logger.info("wrote %s", path)

    def _write_csv(self, path: Path, frame: pd.DataFrame):
        write_text_atomic(path, frame.to_csv(index=False))
        logger.info("wrote %s", path)


def _read_json(path: str) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _with_delta(row: WelfareInputs, delta: float) -> WelfareInputs:
    values = row.to_dict()
    values["delta"] = delta
    return WelfareInputs(**values)


def run(argv: Optional[Sequence[str]] = None, console: Optional[Console] = None) -> int:
    """Parse arguments, run the command and return the exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    out = Path(args.out or "out")
    try:
        app = App(args, console)
        out = app.out
        return app.run()
    except (KinkWelfareError, OSError, json.JSONDecodeError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        manifest = {
            "command": args.command,
            "error_type": type(e).__name__,
            "error": str(e),
        }
        try:
            text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
            write_text_atomic(out / "errors.json", text)
        except OSError:
            pass
        return EXIT_ERROR


__all__ = ["run", "build_parser", "App"]
