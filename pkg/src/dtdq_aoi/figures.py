"""Built-in parameter sets for the reference figures, run at desk scale.

Each ``figN`` function writes CSV data plus a gnuplot script and returns the
paths.  Simulation lengths default to a few hundred thousand slots; pass
``slots`` to change them.

fig3  theory and simulation of E[AoI], E[AoI^2], E[PAoI] vs mean service
      (geometric and uniform, k in {3, 4, 7, 8}, means 1..12)
fig4  E[AoI] vs k for means {2, 4, ..., 12} (geometric, uniform) and the
      k*/gain panel vs mean (step 0.5)
fig5  triangular, mean 13: E[AoI] vs variance for k in {0, 2, 4, 6, 8} and k*
fig6  triangular: k* and gain vs variance for means {9, 11, 13}
fig7  geometric, gain surface over E[T1] x E[T2] in {2, 4, ..., 12}
fig8  triangular (variance 0.5), gain surface over {3, 5, ..., 13}^2
"""

from __future__ import annotations

import logging
from pathlib import Path

from .amc import SystemConfig
from .dph import dph_triangular
from .io import Provenance, Series, write_gnuplot, write_records_csv
from .metrics import aoi_mean, aoi_second_moment, paoi_mean
from .optimizer import aoi_curve, family, freezing_gain, point_seed, sweep_mean, sweep_nonidentical
from .rmc import build_model
from .simulator import simulate

__all__ = ["FIGURES", "reproduce", "FIGURE_PARAMETERS"]

logger = logging.getLogger(__name__)

FIGURE_PARAMETERS = {
    "fig3": {"families": ["geometric", "uniform"], "k": [3, 4, 7, 8], "means": list(range(1, 13)),
             "slots": 200_000},
    "fig4": {"families": ["geometric", "uniform"], "curve_means": [2, 4, 6, 8, 10, 12], "k": list(range(1, 21)),
             "panel_means": [1 + 0.5 * i for i in range(23)], "slots": 400_000},
    "fig5": {"mean": 13, "variances": [0, 0.5, 1, 2, 4, 6, 8, 10, 12, 14], "k": [2, 4, 6, 8], "slots": 400_000},
    "fig6": {"means": [9, 11, 13], "variances": [0, 0.5, 1, 2, 4, 6, 8, 10], "slots": 400_000},
    "fig7": {"family": "geometric", "means": [2, 4, 6, 8, 10, 12], "slots": 400_000},
    "fig8": {"family": "triangular", "variance": 0.5, "means": [3, 5, 7, 9, 11, 13], "slots": 400_000},
}


def _ident(make, m, k=1):
    d = make(m)
    return SystemConfig(d, d, k)


def fig3(out: Path, prov: Provenance, slots=None, seed=0, k_max=None) -> list[Path]:
    par = FIGURE_PARAMETERS["fig3"]
    slots = slots or par["slots"]
    rows = []
    idx = 0
    for fam in par["families"]:
        make = family(fam)
        for k in par["k"]:
            for m in par["means"]:
                model = build_model(_ident(make, m, k))
                sim = simulate(_ident(make, m, k), slots, point_seed(seed, idx))
                idx += 1
                rows.append({
                    "family": fam, "k": k, "mean": float(m),
                    "aoi_mean_theory": aoi_mean(model),
                    "aoi_second_moment_theory": aoi_second_moment(model),
                    "paoi_mean_theory": paoi_mean(model),
                    "aoi_mean_sim": sim.aoi_mean, "aoi_mean_se": sim.aoi_mean_se,
                    "aoi_second_moment_sim": sim.aoi_second_moment,
                    "aoi_second_moment_se": sim.aoi_second_moment_se,
                    "paoi_mean_sim": sim.paoi_mean, "paoi_mean_se": sim.paoi_mean_se,
                })
    # gnuplot cannot filter on strings, so each family gets its own file
    paths = []
    cols = {}
    for fam in par["families"]:
        sub = [r for r in rows if r["family"] == fam]
        name = f"fig3_{fam}.csv"
        paths.append(write_records_csv(out / name, sub, prov))
        cols[name] = list(sub[0].keys())
    for metric, label in (("aoi_mean", "average AoI"), ("aoi_second_moment", "average squared AoI"),
                          ("paoi_mean", "average PAoI")):
        series = []
        for fam in par["families"]:
            for k in par["k"]:
                series.append(Series(f"fig3_{fam}.csv", "mean", f"{metric}_theory",
                                     f"{fam} k={k} (T)", "lines", f"k=={k}"))
                series.append(Series(f"fig3_{fam}.csv", "mean", f"{metric}_sim",
                                     f"{fam} k={k} (S)", "points", f"k=={k}"))
        paths.append(write_gnuplot(out / f"fig3_{metric}.gp", series, prov, f"{label} vs mean service time",
                                   "mean service time (slots)", label, cols))
    return paths


def fig4(out: Path, prov: Provenance, slots=None, seed=0, k_max=None) -> list[Path]:
    par = FIGURE_PARAMETERS["fig4"]
    slots = slots or par["slots"]
    paths = []
    cols = {}
    for panel, fam in zip("ab", par["families"]):
        make = family(fam)
        rows = []
        for m in par["curve_means"]:
            curve = aoi_curve(_ident(make, m), par["k"], with_paoi=False)
            rows += [{"mean": float(m), "k": k, "aoi_mean": a} for k, a in zip(curve.k_values, curve.aoi_means)]
        name = f"fig4{panel}_{fam}.csv"
        paths.append(write_records_csv(out / name, rows, prov))
        cols[name] = list(rows[0].keys())
        series = [Series(name, "k", "aoi_mean", f"E[T]={m}", "linespoints", f"mean=={float(m)}")
                  for m in par["curve_means"]]
        paths.append(write_gnuplot(out / f"fig4{panel}.gp", series, prov, f"average AoI vs k ({fam})",
                                   "freezing parameter k", "average AoI", cols))
    series = []
    for fam_idx, fam in enumerate(par["families"]):
        means = [m for m in par["panel_means"] if fam != "uniform" or float(2 * m).is_integer()]
        sweep = sweep_mean(fam, means, k_max=k_max, sim_slots=slots, seed=seed + fam_idx)
        name = f"fig4c_{fam}.csv"
        rows = sweep.optimum_records()
        paths.append(write_records_csv(out / name, rows, prov))
        cols[name] = list(rows[0].keys())
        series.append(Series(name, "mean", "k_star", f"k* {fam}", "steps"))
        series.append(Series(name, "mean", "gain_percent", f"gain % {fam}", "linespoints"))
    paths.append(write_gnuplot(out / "fig4c.gp", series, prov, "optimum k and freezing gain vs mean",
                               "mean service time (slots)", "k* / gain (%)", cols))
    return paths


def fig5(out: Path, prov: Provenance, slots=None, seed=0, k_max=None) -> list[Path]:
    par = FIGURE_PARAMETERS["fig5"]
    slots = slots or par["slots"]
    rows = []
    for idx, var in enumerate(par["variances"]):
        d = dph_triangular(par["mean"], var)
        base = SystemConfig(d, d, 1)
        rec = freezing_gain(base, k_max, slots, point_seed(seed, idx))
        row = {"variance": float(var), "k0_sim": rec.baseline_k0_mean}
        curve = dict(zip(rec.curve.k_values, rec.curve.aoi_means))
        for k in par["k"]:
            row[f"k{k}"] = curve[k] if k in curve else aoi_mean(build_model(base.with_k(k)))
        row["k_star"] = rec.k_star
        row["aoi_mean_at_k_star"] = rec.aoi_mean_at_k_star
        rows.append(row)
    name = "fig5.csv"
    paths = [write_records_csv(out / name, rows, prov)]
    cols = {name: list(rows[0].keys())}
    series = [Series(name, "variance", "k0_sim", "k=0 (S)", "linespoints")]
    series += [Series(name, "variance", f"k{k}", f"k={k}", "linespoints") for k in par["k"]]
    series.append(Series(name, "variance", "aoi_mean_at_k_star", "k=k*", "linespoints"))
    paths.append(write_gnuplot(out / "fig5.gp", series, prov, "average AoI vs variance (triangular, mean 13)",
                               "Var[T]", "average AoI", cols))
    return paths


def fig6(out: Path, prov: Provenance, slots=None, seed=0, k_max=None) -> list[Path]:
    par = FIGURE_PARAMETERS["fig6"]
    slots = slots or par["slots"]
    rows = []
    idx = 0
    for m in par["means"]:
        for var in par["variances"]:
            d = dph_triangular(m, var)
            rec = freezing_gain(SystemConfig(d, d, 1), k_max, slots, point_seed(seed, idx))
            idx += 1
            rows.append({"mean": float(m), "variance": float(var), "k_star": rec.k_star,
                         "gain_percent": rec.gain_percent, "gain_ci_low": rec.gain_ci[0],
                         "gain_ci_high": rec.gain_ci[1]})
    name = "fig6.csv"
    paths = [write_records_csv(out / name, rows, prov)]
    cols = {name: list(rows[0].keys())}
    series = []
    for m in par["means"]:
        series.append(Series(name, "variance", "gain_percent", f"gain E[T]={m}", "linespoints", f"mean=={float(m)}"))
        series.append(Series(name, "variance", "k_star", f"k* E[T]={m}", "steps", f"mean=={float(m)}"))
    paths.append(write_gnuplot(out / "fig6.gp", series, prov, "k* and freezing gain vs variance (triangular)",
                               "Var[T]", "k* / gain (%)", cols))
    return paths


def _surface(out, prov, fig, make, means, slots, seed, k_max) -> list[Path]:
    sweep = sweep_nonidentical(make, means, means, k_max=k_max, sim_slots=slots, seed=seed)
    rows = sweep.optimum_records()
    name = f"{fig}.csv"
    paths = [write_records_csv(out / name, rows, prov)]
    cols = {name: list(rows[0].keys())}
    series = [Series(name, "mean1", "mean2", "gain (%)", "pm3d")]
    paths.append(write_gnuplot(out / f"{fig}.gp", series, prov, "freezing gain vs mean service times",
                               "E[T1]", "E[T2]", cols, splot=True, z="gain_percent"))
    return paths


def fig7(out: Path, prov: Provenance, slots=None, seed=0, k_max=None) -> list[Path]:
    par = FIGURE_PARAMETERS["fig7"]
    return _surface(out, prov, "fig7", family(par["family"]), par["means"], slots or par["slots"], seed, k_max)


def fig8(out: Path, prov: Provenance, slots=None, seed=0, k_max=None) -> list[Path]:
    par = FIGURE_PARAMETERS["fig8"]
    make = family("triangular", variance=par["variance"])
    return _surface(out, prov, "fig8", make, par["means"], slots or par["slots"], seed, k_max)


FIGURES = {"fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6, "fig7": fig7, "fig8": fig8}


def reproduce(figure: str, out, prov: Provenance, slots=None, seed=0, k_max=None) -> list[Path]:
    if figure not in FIGURES:
        raise KeyError(figure)
    return FIGURES[figure](Path(out), prov, slots=slots, seed=seed, k_max=k_max)
