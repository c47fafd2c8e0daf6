"""Command-line entry point.

    mlsync simulate --config <path|bundled> [--set key=value]... [--out DIR] [--format csv|csv+plot]
    mlsync sweep --config <path|bundled> [--axis path=v1,v2,...]... --out DIR
    mlsync scenarios

Exit status: 0 success, 2 configuration error, 3 divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import config as cfg
from .harness import (COUPLED, ConfigError, oscillation_summary, run_coupled,
                      run_single, run_sweep, sync_metrics)
from .integrator import Termination

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 2, 3

SINGLE_COLUMNS = ("t", "V1", "N1")
COUPLED_COLUMNS = ("t", "V1", "N1", "V2", "N2", "sigma", "e_V", "e_N", "Q", "omega")
METRIC_FIELDS = ("sync_time", "final_sigma", "max_abs_ev_tail", "max_abs_en_tail",
                 "q_final", "omega_first_nonpositive_onset")


def fmt(x) -> str:
    """17 significant digits, empty for a missing value."""
    return "" if x is None else format(float(x), ".17g")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _overrides(pairs) -> dict:
    return dict(cfg.parse_assignment(p, f"--set {p}") for p in pairs or ())


def _plot_script(columns, coupled: bool) -> str:
    lines = [
        "# gnuplot script; run from the output directory: gnuplot plot.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,500",
        "set xlabel 't'",
        "set output 'V.png'",
        "plot " + ", ".join(f"'trajectory.csv' using 1:{columns.index(c) + 1} with lines"
                            for c in columns if c.startswith("V")),
        "set output 'N.png'",
        "plot " + ", ".join(f"'trajectory.csv' using 1:{columns.index(c) + 1} with lines"
                            for c in columns if c.startswith("N")),
    ]
    if coupled:
        lines += [
            "set logscale y",
            "set output 'errors.png'",
            "plot 'trajectory.csv' using 1:(abs($7)) title '|V1 - V2|' with lines, "
            "'trajectory.csv' using 1:(abs($8)) title '|N1 - N2|' with lines",
            "unset logscale y",
            "set output 'sigma.png'",
            "plot 'trajectory.csv' using 1:6 with lines",
        ]
    return "\n".join(lines) + "\n"


def _metrics_json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def cmd_simulate(args) -> int:
    scenario = cfg.load(args.config)
    config = scenario.config.with_overrides(_overrides(args.set))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if config.mode == COUPLED:
        traj, series = run_coupled(config)
        metrics = sync_metrics(series, config.sync_tolerance, config.integrator.t_end)
        columns = COUPLED_COLUMNS
        data = zip(traj.times, *traj.states.T, series.e_v, series.e_n, series.q, series.omega)
        summary = {"scenario": config.name, "mode": config.mode, **metrics.as_dict()}
    else:
        traj = run_single(config)
        osc = oscillation_summary(traj)
        columns = SINGLE_COLUMNS
        data = zip(traj.times, *traj.states.T)
        summary = {"scenario": config.name, "mode": config.mode,
                   "peak_times": list(osc.peak_times), "mean_period": osc.mean_period,
                   "v_min": osc.v_min, "v_max": osc.v_max}
    summary.update(termination=traj.termination.value, t_final=traj.final_time, samples=len(traj),
                   steps_accepted=traj.stats.accepted, steps_rejected=traj.stats.rejected)

    _write_csv(out / "trajectory.csv", columns, ([fmt(x) for x in row] for row in data))
    (out / "metrics.json").write_text(_metrics_json(summary))
    if args.format == "csv+plot":
        (out / "plot.gp").write_text(_plot_script(columns, config.mode == COUPLED))

    for key, value in summary.items():
        if key != "peak_times":
            print(f"{key}: {value if isinstance(value, str) or value is None else fmt(value)}")
    if traj.termination is Termination.DIVERGENCE_GUARD:
        print(f"error: divergence, {traj.message}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


def _parse_axis(text: str):
    path, values = cfg.parse_assignment(text, f"--axis {text}")
    return path, cfg.parse_values(values, f"--axis {text}")


def cmd_sweep(args) -> int:
    scenario = cfg.load(args.config)
    base = scenario.config.with_overrides(_overrides(args.set))
    scenario = cfg.ScenarioFile(base, scenario.axes, scenario.max_cells)
    spec = scenario.sweep_spec(_parse_axis(a) for a in args.axis or ())
    rows = run_sweep(spec, workers=args.workers)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = (*spec.paths, "status", "termination", *METRIC_FIELDS, "steps_accepted", "steps_rejected")
    table = []
    for row in rows:
        m = row.metrics.as_dict() if row.metrics else {}
        table.append([*(fmt(v) for v in row.values), row.status, row.termination or "",
                      *(fmt(m.get(f)) for f in METRIC_FIELDS),
                      *((row.stats.accepted, row.stats.rejected) if row.stats else ("", ""))])
    _write_csv(out / "sweep.csv", header, table)

    n_ok = sum(row.ok for row in rows)
    print(f"cells: {len(rows)}  ok: {n_ok}  failed: {len(rows) - n_ok}")
    for row in rows:
        if not row.ok:
            print(f"  {dict(zip(spec.paths, row.values))}: {row.status}", file=sys.stderr)
    if n_ok:
        return EXIT_OK
    if any(row.termination == Termination.DIVERGENCE_GUARD.value for row in rows):
        return EXIT_DIVERGENCE
    return EXIT_CONFIG


def cmd_scenarios(args) -> int:
    for name in cfg.bundled_names():
        config = cfg.bundled_scenario(name)
        print(f"{name}: {config.description}")
        for line in cfg.format_config(config).splitlines():
            if not line.startswith(("name =", "description =")):
                print(f"    {line}")
        print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlsync",
        description="Morris-Lecar neurons synchronized by speed-gradient coupling control")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and write trajectory.csv")
    sim.add_argument("--config", required=True, help="scenario file or bundled scenario name")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a field")
    sim.add_argument("--out", default=".", help="output directory (default: .)")
    sim.add_argument("--format", choices=("csv", "csv+plot"), default="csv")
    sim.set_defaults(func=cmd_simulate)

    sweep = sub.add_parser("sweep", help="grid over scenario fields, writes sweep.csv")
    sweep.add_argument("--config", required=True, help="scenario file or bundled scenario name")
    sweep.add_argument("--axis", action="append", metavar="PATH=V1,V2,...",
                       help="sweep axis (added to those in the config)")
    sweep.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a base field")
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--workers", type=int, default=1, help="cells evaluated concurrently")
    sweep.set_defaults(func=cmd_sweep)

    scen = sub.add_parser("scenarios", help="list bundled scenarios")
    scen.set_defaults(func=cmd_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
