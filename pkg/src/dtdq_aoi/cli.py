"""Command-line interface: ``dtdq-aoi <command> [options]``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import OUT_ENV, ConfigError, RunConfig, load_config
from .figures import FIGURE_PARAMETERS, FIGURES, reproduce
from .io import Provenance, Series, config_hash, write_csv, write_gnuplot, write_json, write_records_csv
from .metrics import NumericalError, analyze
from .optimizer import find_optimal_k, freezing_gain, family, sweep_mean, sweep_nonidentical, sweep_variance
from .rmc import build_model, build_rmc, rmc_steady_state
from .simulator import simulate

__all__ = ["main", "build_parser"]

logger = logging.getLogger("dtdq_aoi")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, metavar="PATH", help="YAML run configuration")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides config and $%s)" % OUT_ENV)
    p.add_argument("--seed", type=int, metavar="N", help="root RNG seed")
    p.add_argument("--slots", type=int, metavar="N", help="simulated slots")
    p.add_argument("--tail-tol", type=float, metavar="X", help="PMF truncation tolerance")
    p.add_argument("--k-max", type=int, metavar="N", help="largest k in the optimum scan")
    p.add_argument("--format", choices=["csv", "json"], help="write only this format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtdq-aoi",
        description="Exact AoI analysis of two-server discrete-time status-update systems with freezing.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("analyze", help="exact AoI/PAoI distributions and moments"))
    _common(sub.add_parser("simulate", help="slot-level Monte Carlo run (k >= 0)"))
    _common(sub.add_parser("optimize", help="optimum k and gain over zero-wait"))
    _common(sub.add_parser("sweep", help="grid of optima described by the config's sweep block"))
    rep = sub.add_parser("reproduce", help="data and gnuplot script for a published figure")
    rep.add_argument("figure", help=f"one of {', '.join(FIGURES)}")
    _common(rep, config_required=False)
    for name, text in (("dump-states", "state enumeration as CSV"), ("dump-matrix", "transition triples as CSV")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--chain", choices=["amc", "rmc"], default="amc")
    return parser


def _settings(args, require_k: bool = False) -> RunConfig:
    run = load_config(args.config, require_k=require_k)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        run.seed = args.seed
    if args.slots is not None:
        if args.slots < 10**4:
            raise ConfigError("--slots must be >= 10000")
        run.slots = args.slots
    if args.tail_tol is not None:
        if not 0 < args.tail_tol < 1:
            raise ConfigError("--tail-tol must lie in (0, 1)")
        run.tail_tol = args.tail_tol
    if args.k_max is not None:
        if args.k_max < 1:
            raise ConfigError("--k-max must be >= 1")
        run.k_max = args.k_max
    if args.out:
        run.out_dir = Path(args.out)
    if args.format:
        run.formats = (args.format,)
    return run


def _prov(run: RunConfig, command: str) -> Provenance:
    effective = {
        "config": run.document, "seed": run.seed, "slots": run.slots, "batches": run.batches,
        "tail_tol": run.tail_tol, "k_max": run.k_max,
    }
    return Provenance(config_hash(effective), run.seed, command)


def _need_system(run: RunConfig):
    if run.system is None:
        raise ConfigError("field 'servers': required for this command")
    return run.system


def _analytic_k(run: RunConfig, command: str) -> None:
    if run.k is None:
        raise ConfigError("field 'k': required for this command")
    if run.k < 1:
        raise ConfigError(f"field 'k': k=0 has no exact model; use `simulate` for the zero-wait system ({command})")


def cmd_analyze(args) -> list[Path]:
    run = _settings(args)
    _analytic_k(run, "analyze")
    system = _need_system(run)
    report = analyze(build_model(system), tail_tol=run.tail_tol)
    prov = _prov(run, "analyze")
    out = run.out_dir
    paths = []
    if "json" in run.formats:
        paths.append(write_json(out / "report.json", report.to_dict(), prov))
    if "csv" in run.formats:
        paths.append(write_csv(out / "summary.csv", ["metric", "value"], sorted(report.headline().items()), prov))
        paths.append(write_csv(out / "aoi_pmf.csv", ["h", "probability"],
                               enumerate(report.aoi_pmf.tolist(), start=1), prov))
        paths.append(write_csv(out / "paoi_pmf.csv", ["h", "probability"],
                               enumerate(report.paoi_pmf.tolist(), start=1), prov))
    return paths


def cmd_simulate(args) -> list[Path]:
    run = _settings(args)
    system = _need_system(run)
    if run.k is None:
        raise ConfigError("field 'k': required for this command")
    result = simulate(system.with_k(run.k), run.slots, run.seed, run.batches)
    prov = _prov(run, "simulate")
    out = run.out_dir
    paths = []
    if "json" in run.formats:
        paths.append(write_json(out / "simulation.json", result.to_dict(), prov))
    if "csv" in run.formats:
        paths.append(write_csv(out / "sim_summary.csv", ["metric", "value"],
                               sorted(result.headline().items()), prov))
        paths.append(write_csv(out / "aoi_histogram.csv", ["h", "count"],
                               ((h, c) for h, c in enumerate(result.aoi_histogram.tolist()) if c), prov))
        paths.append(write_csv(out / "paoi_histogram.csv", ["h", "count"],
                               ((h, c) for h, c in enumerate(result.paoi_histogram.tolist()) if c), prov))
    return paths


def cmd_optimize(args) -> list[Path]:
    run = _settings(args)
    system = _need_system(run)
    curve = find_optimal_k(system, run.k_max)
    rec = freezing_gain(system, run.k_max, run.slots, run.seed, curve=curve)
    prov = _prov(run, "optimize")
    out = run.out_dir
    paths = []
    if "json" in run.formats:
        paths.append(write_json(out / "optimum.json", {**rec.summary(), "curve": curve.records()}, prov))
    if "csv" in run.formats:
        paths.append(write_records_csv(out / "curve.csv", curve.records(), prov))
        paths.append(write_records_csv(out / "optimum.csv", [{
            key: val for key, val in rec.summary().items() if key not in ("config", "gain_ci")
        }], prov))
    return paths


def cmd_sweep(args) -> list[Path]:
    run = _settings(args)
    spec = run.sweep
    if not spec:
        raise ConfigError("field 'sweep': required for this command")
    k_max = run.k_max if args.k_max is not None else spec.get("k_max", run.k_max)
    slots = run.slots if args.slots is not None else spec.get("sim_slots", run.slots)
    seed = run.seed if args.seed is not None else spec.get("seed", run.seed)
    kind = spec["type"]
    fam = spec["family"]
    make = family(fam, variance=spec["variance"]) if fam == "triangular" else family(fam)
    if kind == "mean":
        result = sweep_mean(make, spec["means"], k_max, slots, seed, spec["priority"])
    elif kind == "variance":
        result = sweep_variance(spec["mean"], spec["variances"], k_max, slots, seed, spec["priority"])
    else:
        result = sweep_nonidentical(make, spec["means1"], spec["means2"], k_max, slots, seed, spec["priority"])
    run.seed = seed
    prov = _prov(run, "sweep")
    out = run.out_dir
    paths = []
    if "json" in run.formats:
        paths.append(write_json(out / "sweep.json", result.to_dict(), prov))
    if "csv" in run.formats:
        paths.append(write_records_csv(out / "sweep_long.csv", result.long_records(), prov))
        paths.append(write_records_csv(out / "sweep_optima.csv", result.optimum_records(), prov))
        cols = {"sweep_optima.csv": list(result.optimum_records()[0].keys())}
        x = "variance" if kind == "variance" else "mean" if kind == "mean" else None
        if x:
            series = [Series("sweep_optima.csv", x, "gain_percent", "gain (%)"),
                      Series("sweep_optima.csv", x, "k_star", "k*", "steps")]
            paths.append(write_gnuplot(out / "sweep.gp", series, prov, f"{kind} sweep", x, "k* / gain (%)", cols))
        else:
            series = [Series("sweep_optima.csv", "mean1", "mean2", "gain (%)", "pm3d")]
            paths.append(write_gnuplot(out / "sweep.gp", series, prov, "nonidentical sweep", "E[T1]", "E[T2]",
                                       cols, splot=True, z="gain_percent"))
    return paths


def cmd_reproduce(args) -> list[Path]:
    if args.figure not in FIGURES:
        raise ConfigError(f"unknown figure {args.figure!r}; expected one of {', '.join(FIGURES)}")
    if args.config:
        raise ConfigError("reproduce uses built-in parameter sets; --config is not accepted")
    for flag in ("tail_tol", "format"):
        if getattr(args, flag) is not None:
            raise ConfigError(f"--{flag.replace('_', '-')} is not used by reproduce")
    if args.slots is not None and args.slots < 10**4:
        raise ConfigError("--slots must be >= 10000")
    seed = args.seed if args.seed is not None else 0
    out = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV) or "results") / args.figure
    document = {"figure": args.figure, "parameters": FIGURE_PARAMETERS[args.figure],
                "slots": args.slots, "k_max": args.k_max}
    prov = Provenance(config_hash(document), seed, f"reproduce {args.figure}")
    return reproduce(args.figure, out, prov, slots=args.slots, seed=seed, k_max=args.k_max)


def _dump_space(run: RunConfig, chain: str):
    _analytic_k(run, f"dump-{chain}")
    system = _need_system(run)
    if chain == "amc":
        model = build_model(system)
        return model.space, model.A, model.sigma, (model.c_s, model.c_u)
    rmc = rmc_steady_state(build_rmc(system))
    return rmc.space, rmc.W, rmc.pi, None


def cmd_dump_states(args) -> list[Path]:
    run = _settings(args)
    space, _, vector, _ = _dump_space(run, args.chain)
    name = "sigma" if args.chain == "amc" else "pi"
    rows = ((idx, s.cls, s.i, s.j, s.l, float(vector[idx])) for idx, s in enumerate(space.states))
    prov = _prov(run, f"dump-states {args.chain}")
    return [write_csv(run.out_dir / f"{args.chain}_states.csv", ["index", "class", "i", "j", "l", name], rows, prov)]


def cmd_dump_matrix(args) -> list[Path]:
    run = _settings(args)
    space, mat, _, exits = _dump_space(run, args.chain)
    coo = mat.tocoo()
    order = np.lexsort((coo.col, coo.row))
    rows = []
    for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        rows.append((int(r), "%d-%d-%d-%d" % tuple(space.states[r]), int(c), "%d-%d-%d-%d" % tuple(space.states[c]),
                     float(v)))
    if exits is not None:
        # absorbing targets: 15 = up-to-date reception, 16 = P* obsolete
        for label, vec in (("15", exits[0]), ("16", exits[1])):
            for r in np.flatnonzero(vec):
                rows.append((int(r), "%d-%d-%d-%d" % tuple(space.states[r]), -1, label, float(vec[r])))
        rows.sort(key=lambda row: (row[0], row[2] if row[2] >= 0 else len(space) + int(row[3])))
    prov = _prov(run, f"dump-matrix {args.chain}")
    header = ["row", "row_state", "col", "col_state", "probability"]
    return [write_csv(run.out_dir / f"{args.chain}_matrix.csv", header, rows, prov)]


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "reproduce": cmd_reproduce,
    "dump-states": cmd_dump_states,
    "dump-matrix": cmd_dump_matrix,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        paths = COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
