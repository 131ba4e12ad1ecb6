"""Command-line scenario runner.

    rb2stirap run <config> [--output PATH] [--threads N] [--seed N]
    rb2stirap validate <config>
    rb2stirap version

``run`` writes one CSV per scenario plus a ``.manifest`` file that is itself
a valid configuration echoing every resolved parameter in canonical units.
Set ``RB2STIRAP_OUTPUT_DIR`` to redirect outputs into another directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as cfg, fitting, lattice, qdyn
from .errors import BasisSizeError, InsufficientBasisError, NumericalFailure, StepSizeError

log = logging.getLogger("rb2stirap")

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
OUTPUT_ENV = "RB2STIRAP_OUTPUT_DIR"

COLUMNS = {
    "dark-resonance": ("delta_MHz", "remaining_f"),
    "stirap-scan": ("delta_MHz", "roundtrip_eff", "intermediate_f"),
    "hold-scan": ("tau_us", "recovered_fraction"),
    "fit": ("parameter", "value", "sigma", "unit", "rss", "converged", "iterations", "degenerate"),
}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.9g}"


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _lambda_params(c: cfg.ScenarioConfig) -> qdyn.LambdaParams:
    return qdyn.LambdaParams(gamma_e=c["gamma_e"], gamma_laser=c["gamma_laser"], delta_1=c["delta_1"])


def _lattice_params(c: cfg.ScenarioConfig) -> lattice.LatticeParams:
    from scipy import constants

    return lattice.LatticeParams(period_nm=c["period"], mass_kg=c["mass_u"] * constants.atomic_mass,
                                 depth=c["depth_deep"], cutoff=c["cutoff"])


def _run_dark(c, workers):
    grid = c.grid("delta")
    scan = qdyn.square_pulse_scan(grid, c["pulse_length"], c["omega1"], c["omega2"], _lambda_params(c),
                                  workers=workers, scanned_laser=c["scanned_laser"])
    return zip(qdyn.to_mhz(grid), scan.ordinate)


def _schedule(c, o1="omega1", o2="omega2"):
    return qdyn.stirap_schedule(ramp=c["ramp"], peak_omega1=c[o1], peak_omega2=c[o2], hold=c["hold"],
                                cleanup=c["cleanup"], edge=c["edge"])


def _run_stirap(c, workers):
    grid = c.grid("delta")
    eff, mid = qdyn.stirap_round_trip(grid, _schedule(c), _lambda_params(c), workers=workers)
    return zip(qdyn.to_mhz(grid), eff.ordinate, mid.ordinate)


def _hold_chunk(tau, c):
    model = lattice.QuenchModel(c["depth_deep"], c["depth_ratio"], _lattice_params(c), c["n_q"], c["n_bands"])
    return np.clip(model.lowest_band_weight(tau), 0.0, 1.0)


def _run_hold(c, workers):
    tau = c.grid("tau")
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = [t for t in np.array_split(tau, workers) if t.size]
        with ProcessPoolExecutor(max_workers=len(chunks)) as ex:
            w = np.concatenate(list(ex.map(_hold_chunk, chunks, [c] * len(chunks))))
    else:
        w = _hold_chunk(tau, c)
    curve = lattice.HoldCurve(tau, c["stirap_eff"] * w ** c["dims"])
    return zip(curve.tau, curve.recovered)


def _read_columns(path: Path, names):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [np.array([float(r[n]) for r in rows]) for n in names]


def _run_fit(c, workers):
    model = c["model"]
    data = Path(c["data"])  # relative to the working directory, like outputs
    nan = np.isnan

    def bounds(default):
        lo = default[0] if nan(c["lower"]) else c["lower"]
        hi = default[1] if nan(c["upper"]) else c["upper"]
        return lo, hi

    if model == "dark_resonance":
        x, y = _read_columns(data, ("delta_MHz", "remaining_f"))
        scan = qdyn.ScanResult(qdyn.mhz(x), y, "remaining_f")
        rep = fitting.fit_autler_townes(
            scan, c["omega1"], _lambda_params(c), c["pulse_length"],
            guess=None if nan(c["guess"]) else c["guess"],
            bounds=bounds((0.0, qdyn.mhz(30.0))), scanned_laser=c["scanned_laser"],
        )
        rows = [("omega2", qdyn.to_mhz(rep["omega2"]), qdyn.to_mhz(rep.sigmas["omega2"]), "MHz"),
                ("baseline", rep["baseline"], rep.sigmas["baseline"], "")]
    elif model == "roundtrip":
        x, y = _read_columns(data, ("delta_MHz", "roundtrip_eff"))
        scan = qdyn.ScanResult(qdyn.mhz(x), y, "roundtrip_efficiency")
        rep = fitting.fit_linewidth(
            scan, _schedule(c, "stirap_omega1", "stirap_omega2"), _lambda_params(c),
            guess=qdyn.khz(10.0) if nan(c["guess"]) else c["guess"],
            bounds=bounds((0.0, qdyn.khz(200.0))),
        )
        rows = [("gamma_laser", rep["gamma_laser"] / qdyn.khz(1.0), rep.sigmas["gamma_laser"] / qdyn.khz(1.0), "kHz")]
    else:
        x, y = _read_columns(data, ("tau_us", "recovered_fraction"))
        rep = fitting.fit_depth_ratio(
            lattice.HoldCurve(x, y), c["depth_deep"], c["stirap_eff"], _lattice_params(c),
            guess=None if nan(c["guess"]) else c["guess"], bounds=bounds((1.0, 25.0)), dims=c["dims"],
        )
        rows = [("ratio", rep["ratio"], rep.sigmas["ratio"], "")]
    return [r + (rep.rss, rep.converged, rep.iterations, rep.degenerate) for r in rows]


RUNNERS = {"dark-resonance": _run_dark, "stirap-scan": _run_stirap, "hold-scan": _run_hold, "fit": _run_fit}


def resolve_output(c: cfg.ScenarioConfig, output: str | None) -> Path:
    if output:
        return Path(output)
    name = c["output"] or f"{c.scenario.replace('-', '_')}.csv"
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env) / Path(name).name
    return Path(name)


def manifest_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".manifest")


def run_scenario(c: cfg.ScenarioConfig, output: str | None = None, threads: int = 1) -> tuple[int, Path]:
    """Run one scenario; returns (exit status, CSV path)."""
    out = resolve_output(c, output)
    try:
        rows = list(RUNNERS[c.scenario](c, max(1, threads)))
    except (NumericalFailure, StepSizeError, BasisSizeError, InsufficientBasisError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC, out
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO, out
    values = dict(c.values)
    values["output"] = str(out)
    if c.scenario == "fit":
        values["data"] = str(Path(values["data"]).resolve())
    resolved = cfg.ScenarioConfig(c.scenario, values, c.source)
    try:
        write_csv(out, COLUMNS[c.scenario], rows)
        manifest_path(out).write_text(cfg.render(resolved, [f"rb2stirap {__version__}"]))
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO, out
    return EXIT_OK, out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rb2stirap", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("config")
    run.add_argument("--output", help="CSV output path (manifest goes alongside)")
    run.add_argument("--threads", type=int, default=1, help="worker processes for scan points")
    run.add_argument("--seed", type=int, default=None, help="reserved; all models are deterministic")
    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("config")
    sub.add_parser("version", help="print the toolkit version")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    try:
        if args.command == "validate":
            diags = cfg.validate_config(args.config)
            for d in diags:
                print(f"{args.config}:{d}", file=sys.stderr)
            return EXIT_PARSE if diags else EXIT_OK
        c = cfg.load(args.config)
    except cfg.ConfigError as exc:
        for d in exc.diagnostics:
            print(f"{args.config}:{d}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    status, out = run_scenario(c, args.output, args.threads)
    if status == EXIT_OK:
        log.info("wrote %s and %s", out, manifest_path(out))
    return status


if __name__ == "__main__":
    sys.exit(main())
