"""Command-line front end.

Subcommands:
  run       execute one scenario or preset, write metrics + summary footer
  sweep     expand a sweep axis into one run per grid point plus aggregate
  presets   list the built-in experiment presets
  validate  parse and validate a scenario file (optionally dump topology)

Exit codes: 0 success, 1 validation error, 2 runtime error. The default
output directory comes from $FLOODSYNC_OUTDIR (falling back to the current
directory).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from multiprocessing import Pool

import numpy as np

from . import flooding, metrics, report
from .engine import run_scenario
from .metrics import MATRIX_COLUMNS, PROTOCOL_COLUMNS
from .presets import PRESET_DESCRIPTIONS, experiment_preset
from .scenario import (
    Scenario,
    ScenarioValidationError,
    apply_sweep_value,
    load_scenario,
    parse_sweep_value,
)
from .units import UnitError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _outdir() -> str:
    return os.environ.get("FLOODSYNC_OUTDIR", ".")


def _load(args) -> Scenario:
    if args.preset:
        sc = experiment_preset(args.preset)
    else:
        sc = load_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "periods", None) is not None:
        overrides["periods"] = args.periods
    if getattr(args, "trials", None) is not None and sc.matrix is not None:
        overrides["matrix"] = dataclasses.replace(sc.matrix, trials=args.trials)
    if overrides:
        sc = dataclasses.replace(sc, **overrides)
    sc.validate()
    return sc


def _ext(fmt: str) -> str:
    return "csv" if fmt == "csv" else "jsonl"


def _write(path: str, fmt: str, columns, rows, footer: list[str]) -> None:
    if fmt == "csv":
        metrics.write_csv(path, columns, rows, footer)
    else:
        metrics.write_jsonl(path, rows, footer)


def _run_one(sc: Scenario, path: str, fmt: str, compare: bool, figures: bool) -> list[str]:
    """Run a scenario, write its metrics file, return the summary footer."""
    result = run_scenario(sc)
    if sc.kind == "matrix":
        footer = metrics.matrix_summary_lines(sc.name, sc.seed, result.matrix_rows)
        _write(path, fmt, MATRIX_COLUMNS, result.matrix_rows, footer)
        if figures:
            report.render_matrix_figures(path, result.matrix_rows)
        return footer

    footer = metrics.summary_lines(sc.name, sc.seed, result.warmup_periods, result.rows)
    if compare:
        off = run_scenario(
            dataclasses.replace(sc, sync=dataclasses.replace(sc.sync, compensation=False))
        )
        on_rows = (
            result.rows
            if sc.sync.compensation
            else run_scenario(
                dataclasses.replace(sc, sync=dataclasses.replace(sc.sync, compensation=True))
            ).rows
        )
        footer += metrics.comparison_lines(off.rows, on_rows, result.warmup_periods)
    _write(path, fmt, PROTOCOL_COLUMNS, result.rows, footer)
    if figures:
        report.render_protocol_figures(path, result.rows, result.warmup_periods)
    return footer


def cmd_run(args) -> int:
    sc = _load(args)
    path = args.output or os.path.join(_outdir(), f"{sc.name}.{_ext(args.format)}")
    footer = _run_one(sc, path, args.format, args.compare_compensation, args.figures)
    print(f"wrote {path}")
    for line in footer:
        print(f"  {line}")
    return EXIT_OK


def _sweep_point(job) -> tuple[str, tuple[float, ...]]:
    """Run one grid point, write its file, return its aggregate statistics."""
    sc, path, fmt = job
    result = run_scenario(sc)
    if sc.kind == "matrix":
        footer = metrics.matrix_summary_lines(sc.name, sc.seed, result.matrix_rows)
        _write(path, fmt, MATRIX_COLUMNS, result.matrix_rows, footer)
        total = sum(r.trials for r in result.matrix_rows)
        agg = tuple(
            100.0 * sum(getattr(r, f"n_{c}") for r in result.matrix_rows) / total
            for c in metrics.CATEGORIES
        )
    else:
        footer = metrics.summary_lines(sc.name, sc.seed, result.warmup_periods, result.rows)
        _write(path, fmt, PROTOCOL_COLUMNS, result.rows, footer)
        stats = metrics.hop_statistics(result.rows, result.warmup_periods)
        if stats:
            weight = sum(s.samples for s in stats)
            agg = (
                sum(s.mean_err_ns * s.samples for s in stats) / weight,
                stats[-1].std_err_ns,
                stats[-1].mean_sync_ns,
            )
        else:
            agg = (math.nan, math.nan, math.nan)
    return path, agg


def cmd_sweep(args) -> int:
    sc = _load(args)
    if args.axis:
        values = [parse_sweep_value(args.axis, v) for v in args.values.split(",")]
        axis = args.axis
    elif sc.sweep is not None:
        axis, values = sc.sweep.axis, list(sc.sweep.values)
    else:
        raise ScenarioValidationError(
            ["no sweep axis: pass --axis/--values or declare [sweep] in the scenario"]
        )
    if not values:
        raise ScenarioValidationError(["sweep grid is empty"])

    outdir = args.outdir or _outdir()
    os.makedirs(outdir, exist_ok=True)
    jobs = []
    points: list[Scenario] = []
    for idx, value in enumerate(values):
        point = apply_sweep_value(sc, axis, value)
        if axis != "seed":
            derived = int(np.random.SeedSequence((sc.seed, idx)).generate_state(1)[0] % 2**31)
            point = dataclasses.replace(point, seed=derived)
        point.validate()
        points.append(point)
        jobs.append((point, os.path.join(outdir, f"{point.name}.{_ext(args.format)}"), args.format))

    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            done = pool.map(_sweep_point, jobs)
    else:
        done = [_sweep_point(job) for job in jobs]

    labels = [_axis_label(v) for v in values]
    aggregate_path = os.path.join(outdir, f"{sc.name}_{axis}_aggregate.csv")
    is_matrix = points[0].kind == "matrix"
    _write_aggregate(aggregate_path, axis, labels, [agg for _, agg in done], is_matrix)
    if args.figures:
        curve = [
            (label, agg[0], math.nan if is_matrix else agg[1])
            for label, (_, agg) in zip(labels, done)
        ]
        report.render_sweep_figure(aggregate_path, axis, curve)
    for path, _ in done:
        print(f"wrote {path}")
    print(f"wrote {aggregate_path}")
    return EXIT_OK


def _axis_label(value) -> str:
    if value is None:
        return "off"
    return f"{value:g}" if isinstance(value, float) else str(value)


def _write_aggregate(path, axis, labels, aggregates, is_matrix: bool) -> None:
    if is_matrix:
        header = "axis,label," + ",".join(f"pct_{c}" for c in metrics.CATEGORIES)
        fmt = "{:.4f}"
    else:
        header = "axis,label,mean_err_ns,std_err_ns,mean_sync_ns"
        fmt = "{:.6f}"
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for label, agg in zip(labels, aggregates):
            fh.write(f"{axis},{label}," + ",".join(fmt.format(a) for a in agg) + "\n")


def cmd_presets(_args) -> int:
    for name in sorted(PRESET_DESCRIPTIONS):
        print(f"{name:20s} {PRESET_DESCRIPTIONS[name]}")
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    print(f"OK: {sc.name} ({sc.kind}, {len(sc.nodes)} nodes, seed {sc.seed})")
    if args.topology and sc.kind == "protocol":
        graph = flooding.assign_hops(sc.topology(), sc.master, sc.radio, sc.forced_hops)
        sys.stdout.write(flooding.format_topology(graph, sc.radio))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floodsync",
        description="propagation-delay compensation simulator for flooding-synced WSNs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_source(p):
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--preset", help="preset name (see `floodsync presets`)")
        group.add_argument("--scenario", help="path to a scenario TOML file")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--periods", type=int, default=None, help="override the period count")
        p.add_argument("--trials", type=int, default=None, help="override matrix trials per cell")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        p.add_argument("--figures", action="store_true", help="render matplotlib figures")

    p_run = sub.add_parser("run", help="run one scenario")
    add_source(p_run)
    p_run.add_argument("-o", "--output", default=None, help="metrics file path")
    p_run.add_argument(
        "--compare-compensation",
        action="store_true",
        help="also run seed-paired with compensation off and emit a comparison block",
    )
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a sweep over a declared axis")
    add_source(p_sweep)
    p_sweep.add_argument("--axis", default=None, help="sweep axis (overrides the scenario)")
    p_sweep.add_argument("--values", default=None, help="comma-separated sweep values")
    p_sweep.add_argument("--outdir", default=None, help="directory for per-point files")
    p_sweep.add_argument("--jobs", type=int, default=1, help="worker pool size")
    p_sweep.set_defaults(func=cmd_sweep)

    p_presets = sub.add_parser("presets", help="list experiment presets")
    p_presets.set_defaults(func=cmd_presets)

    p_val = sub.add_parser("validate", help="validate a scenario file")
    p_val.add_argument("--scenario", required=True)
    p_val.add_argument("--topology", action="store_true", help="dump the flooding graph")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioValidationError, UnitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
