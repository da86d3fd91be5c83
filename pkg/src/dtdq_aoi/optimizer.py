"""Freezing-parameter search and the gain studies built on it.

The optimum ``k*`` comes from a full analytic scan of ``E[AoI]`` over
``k = 1..k_max``.  The zero-wait system (``k = 0``) has no absorbing-chain
model, so its mean AoI is simulated and every gain carries the baseline's
Monte Carlo uncertainty.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .amc import S1, Priority, SystemConfig
from .dph import DphDistribution, dph_geometric, dph_from_pmf, dph_triangular, dph_uniform, expected_max
from .metrics import aoi_mean, paoi_mean
from .rmc import build_model
from .simulator import simulate

__all__ = [
    "KCurve",
    "GainRecord",
    "SweepResult",
    "default_k_max",
    "aoi_curve",
    "find_optimal_k",
    "freezing_gain",
    "family",
    "sweep_mean",
    "sweep_variance",
    "sweep_nonidentical",
    "point_seed",
]

logger = logging.getLogger(__name__)

TIE_RTOL = 1e-12


@dataclass
class KCurve:
    """Analytic mean AoI and PAoI over a range of freezing parameters."""

    k_values: list
    aoi_means: list
    paoi_means: list
    k_star: int
    aoi_mean_at_k_star: float

    def records(self) -> list[dict]:
        return [
            {"k": k, "aoi_mean": a, "paoi_mean": p}
            for k, a, p in zip(self.k_values, self.aoi_means, self.paoi_means)
        ]


@dataclass
class GainRecord:
    """Optimum ``k`` against the simulated zero-wait baseline.

    ``gain_percent`` is clipped at zero; ``beneficial`` is False when the
    unclipped gain is not positive, and ``k_star`` is then reported as 0.
    """

    config: dict
    k_star: int
    k_star_analytic: int
    aoi_mean_at_k_star: float
    baseline_k0_mean: float
    baseline_k0_se: float
    gain_percent: float
    raw_gain_percent: float
    gain_ci: tuple
    beneficial: bool
    sim_slots: int
    seed: int
    curve: KCurve = field(repr=False)

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("curve")
        out["gain_ci"] = list(self.gain_ci)
        return out


@dataclass
class SweepResult:
    """Grid of gain records.

    ``axes`` maps each swept parameter to its grid; ``points`` holds the
    parameter values of every grid point in grid order and ``optima`` the
    matching :class:`GainRecord`.
    """

    name: str
    axes: dict
    points: list
    optima: list

    def long_records(self) -> list[dict]:
        """One row per grid point per ``k`` (``k = 0`` is the simulated baseline)."""
        rows = []
        for idx, (params, rec) in enumerate(zip(self.points, self.optima)):
            base = {"point": idx, **params}
            rows.append({**base, "k": 0, "aoi_mean": rec.baseline_k0_mean, "paoi_mean": float("nan"),
                         "source": "simulation"})
            for r in rec.curve.records():
                rows.append({**base, **r, "source": "analytic"})
        return rows

    def optimum_records(self) -> list[dict]:
        rows = []
        for idx, (params, rec) in enumerate(zip(self.points, self.optima)):
            rows.append({
                "point": idx,
                **params,
                "k_star": rec.k_star,
                "k_star_analytic": rec.k_star_analytic,
                "aoi_mean_at_k_star": rec.aoi_mean_at_k_star,
                "baseline_k0_mean": rec.baseline_k0_mean,
                "baseline_k0_se": rec.baseline_k0_se,
                "gain_percent": rec.gain_percent,
                "gain_ci_low": rec.gain_ci[0],
                "gain_ci_high": rec.gain_ci[1],
                "beneficial": rec.beneficial,
            })
        return rows

    def to_dict(self) -> dict:
        return {"name": self.name, "axes": self.axes, "optima": self.optimum_records()}


def default_k_max(base: SystemConfig) -> int:
    """``2 ceil(E[max(T1, T2)])``."""
    return max(1, 2 * math.ceil(expected_max(base.dph1, base.dph2) - 1e-9))


def aoi_curve(base: SystemConfig, k_values: Sequence[int], with_paoi: bool = True) -> KCurve:
    """Exact mean AoI (and PAoI) for each ``k``; ``k*`` is the first minimiser."""
    ks = [int(k) for k in k_values]
    if not ks or min(ks) < 1:
        raise ValueError("k values must be >= 1 for the analytic curve")
    means, peaks = [], []
    for k in ks:
        model = build_model(base.with_k(k))
        means.append(aoi_mean(model))
        peaks.append(paoi_mean(model) if with_paoi else float("nan"))
    best = 0
    for idx in range(1, len(ks)):
        if means[idx] < means[best] - TIE_RTOL * max(1.0, abs(means[best])):
            best = idx
    return KCurve(ks, means, peaks, ks[best], means[best])


def find_optimal_k(base: SystemConfig, k_max: int | None = None, with_paoi: bool = True) -> KCurve:
    """Full scan of ``k = 1..k_max``; no unimodality is assumed.

    Parameters
    ----------
    base : SystemConfig
        Its own ``k`` is ignored.
    k_max : int, optional
        Defaults to :func:`default_k_max`.
    """
    k_max = default_k_max(base) if k_max is None else int(k_max)
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    return aoi_curve(base, range(1, k_max + 1), with_paoi=with_paoi)


def _gain(baseline: float, optimum: float) -> float:
    return 100.0 * (baseline - optimum) / baseline


def freezing_gain(
    base: SystemConfig,
    k_max: int | None = None,
    sim_slots: int = 10**6,
    seed: int = 0,
    confidence: float = 0.95,
    curve: KCurve | None = None,
) -> GainRecord:
    """Percentage reduction of mean AoI at ``k*`` relative to zero-wait.

    The confidence interval maps the normal interval of the simulated
    baseline through the (monotone) gain formula.
    """
    if sim_slots < 10**4:
        raise ValueError("sim_slots must be at least 10^4")
    curve = curve if curve is not None else find_optimal_k(base, k_max)
    sim = simulate(base.with_k(0), sim_slots, seed)
    z = stats.norm.ppf(0.5 + confidence / 2)
    lo_base = sim.aoi_mean - z * sim.aoi_mean_se
    hi_base = sim.aoi_mean + z * sim.aoi_mean_se
    raw = _gain(sim.aoi_mean, curve.aoi_mean_at_k_star)
    ci = (float(_gain(lo_base, curve.aoi_mean_at_k_star)), float(_gain(hi_base, curve.aoi_mean_at_k_star)))
    beneficial = raw > 0
    return GainRecord(
        config=base.with_k(curve.k_star).summary(),
        k_star=curve.k_star if beneficial else 0,
        k_star_analytic=curve.k_star,
        aoi_mean_at_k_star=curve.aoi_mean_at_k_star,
        baseline_k0_mean=sim.aoi_mean,
        baseline_k0_se=sim.aoi_mean_se,
        gain_percent=max(0.0, raw),
        raw_gain_percent=raw,
        gain_ci=ci,
        beneficial=beneficial,
        sim_slots=int(sim_slots),
        seed=int(seed),
        curve=curve,
    )


def family(name: str, **fixed) -> Callable[[float], DphDistribution]:
    """Service-time family indexed by its mean.

    ``geometric``, ``uniform`` (on ``1..2m-1``), ``deterministic`` and
    ``triangular`` (needs ``variance``).
    """
    if name == "geometric":
        return lambda m: _labelled(dph_geometric(1.0 / m), f"geometric(mean={m:g})")
    if name == "uniform":
        def uniform(m):
            top = 2 * m - 1
            if abs(top - round(top)) > 1e-9:
                raise ValueError(f"uniform on 1..b needs a mean that is a multiple of 0.5, got {m}")
            return dph_uniform(1, int(round(top)))
        return uniform
    if name == "deterministic":
        def deterministic(m):
            if abs(m - round(m)) > 1e-9:
                raise ValueError(f"deterministic service needs an integer mean, got {m}")
            return dph_from_pmf({int(round(m)): 1.0}, label=f"deterministic({int(round(m))})")
        return deterministic
    if name == "triangular":
        variance = fixed.get("variance", 0.0)
        return lambda m: dph_triangular(m, variance)
    raise ValueError(f"unknown service family {name!r}")


def _labelled(d: DphDistribution, label: str) -> DphDistribution:
    return DphDistribution(d.alpha, d.B, label=label)


def point_seed(seed: int, index: int) -> int:
    """Independent, reproducible simulation seed for grid point ``index``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _run_grid(name, axes, points, configs, k_max, sim_slots, seed) -> SweepResult:
    optima = []
    for idx, (params, cfg) in enumerate(zip(points, configs)):
        rec = freezing_gain(cfg, k_max, sim_slots, point_seed(seed, idx))
        logger.info("%s %s: k*=%d gain=%.3f%%", name, params, rec.k_star, rec.gain_percent)
        optima.append(rec)
    return SweepResult(name, axes, points, optima)


def sweep_mean(
    dist: str | Callable,
    means: Sequence[float],
    k_max: int | None = None,
    sim_slots: int = 10**6,
    seed: int = 0,
    priority: Priority = S1,
) -> SweepResult:
    """Identical servers, mean service time swept."""
    make = family(dist) if isinstance(dist, str) else dist
    means = [float(m) for m in means]
    configs = [SystemConfig(make(m), make(m), 1, priority) for m in means]
    points = [{"mean": m} for m in means]
    return _run_grid("sweep_mean", {"mean": means}, points, configs, k_max, sim_slots, seed)


def sweep_variance(
    mean: float,
    variances: Sequence[float],
    k_max: int | None = None,
    sim_slots: int = 10**6,
    seed: int = 0,
    priority: Priority = S1,
) -> SweepResult:
    """Identical triangular servers with fixed mean, variance swept."""
    variances = [float(v) for v in variances]
    configs = []
    for var in variances:
        d = dph_triangular(mean, var)
        configs.append(SystemConfig(d, d, 1, priority))
    points = [{"mean": float(mean), "variance": v} for v in variances]
    return _run_grid("sweep_variance", {"mean": [float(mean)], "variance": variances}, points, configs,
                     k_max, sim_slots, seed)


def sweep_nonidentical(
    dist: str | Callable,
    means1: Sequence[float],
    means2: Sequence[float],
    k_max: int | None = None,
    sim_slots: int = 10**6,
    seed: int = 0,
    priority: Priority = S1,
) -> SweepResult:
    """Grid over ``E[T1] x E[T2]`` (row-major in ``means1``)."""
    make = family(dist) if isinstance(dist, str) else dist
    means1 = [float(m) for m in means1]
    means2 = [float(m) for m in means2]
    configs, points = [], []
    for m1 in means1:
        for m2 in means2:
            configs.append(SystemConfig(make(m1), make(m2), 1, priority))
            points.append({"mean1": m1, "mean2": m2})
    return _run_grid("sweep_nonidentical", {"mean1": means1, "mean2": means2}, points, configs,
                     k_max, sim_slots, seed)
