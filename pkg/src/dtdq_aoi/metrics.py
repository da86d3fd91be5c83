"""Exact AoI and peak-AoI laws of the dual-server system.

With ``S = (I - A)^-1`` (never formed; every product is a sparse solve):

* ``Pr(AoI = h)  = sigma A^h v   / (sigma A S v)``
* ``Pr(PAoI = h) = sigma A^h c_s / (sigma A S c_s)``
* ``E[AoI] = sigma A S^2 v / sigma A S v`` and
  ``E[AoI^2] = sigma A S^3 (A + I) v / sigma A S v``

The probability still outstanding after ``H`` terms is
``sigma A^(H+1) S x / (sigma A S x)`` for ``x`` in ``{v, c_s}``; it is
evaluated directly rather than as ``1 - sum``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .amc import AmcModel, SystemConfig
from .rmc import build_model

__all__ = [
    "TruncatedPmf",
    "AoiReport",
    "aoi_pmf",
    "paoi_pmf",
    "aoi_mean",
    "aoi_second_moment",
    "paoi_mean",
    "paoi_second_moment",
    "obsolete_probability",
    "pmf_moment",
    "aoi_moment",
    "analyze",
    "DEFAULT_TAIL_TOL",
]

DEFAULT_TAIL_TOL = 1e-10
MAX_STEPS = 10**7


class TruncatedPmf(NamedTuple):
    """PMF on ``h = 1..truncation_h`` plus the probability beyond it."""

    values: np.ndarray
    truncation_h: int
    tail_mass: float


class NumericalError(RuntimeError):
    pass


def _require_sigma(model: AmcModel) -> np.ndarray:
    if model.sigma is None:
        raise ValueError("model has no initial vector; build it with build_model()")
    return model.sigma


def _solver(model: AmcModel):
    lu = model._cache.get("lu")
    if lu is None:
        n = model.M
        system = (sp.identity(n, format="csc") - model.A.tocsc()).tocsc()
        try:
            lu = spla.splu(system)
        except RuntimeError as exc:
            raise NumericalError(f"I - A is singular: {exc}") from exc
        model._cache["lu"] = lu
    return lu


def _resolvent(model: AmcModel, rhs: np.ndarray, times: int = 1) -> list[np.ndarray]:
    """``[S rhs, S^2 rhs, ...]`` by repeated solves."""
    lu = _solver(model)
    out = []
    x = np.asarray(rhs, dtype=float)
    for _ in range(times):
        x = lu.solve(x)
        if not np.all(np.isfinite(x)):
            raise NumericalError("non-finite solution of (I - A) x = rhs")
        out.append(x)
    return out


def _sigma_a(model: AmcModel) -> np.ndarray:
    sa = model._cache.get("sigmaA")
    if sa is None:
        sa = model.A.T @ _require_sigma(model)
        model._cache["sigmaA"] = sa
    return sa


def _truncated(model: AmcModel, target: np.ndarray, tail_tol: float) -> TruncatedPmf:
    if not 0 < tail_tol < 1:
        raise ValueError(f"tail_tol must be in (0, 1), got {tail_tol}")
    (x1,) = _resolvent(model, target)
    y = _sigma_a(model)
    denom = float(y @ x1)
    if not denom > 0:
        raise NumericalError("normalising constant is not positive")
    # A S target = S target - target
    ahead = x1 - target
    A_t = model.A.T.tocsr()
    values = []
    for h in range(1, MAX_STEPS + 1):
        values.append(float(y @ target) / denom)
        tail = float(y @ ahead) / denom
        if tail < tail_tol:
            return TruncatedPmf(np.clip(np.array(values), 0.0, None), h, max(tail, 0.0))
        y = A_t @ y
    raise NumericalError(f"tail mass still {tail:.3e} after {MAX_STEPS} steps")


def aoi_pmf(model: AmcModel, tail_tol: float = DEFAULT_TAIL_TOL) -> TruncatedPmf:
    """AoI PMF for ``h = 1, 2, ...`` truncated once the remaining mass is below ``tail_tol``."""
    return _truncated(model, model.v, tail_tol)


def paoi_pmf(model: AmcModel, tail_tol: float = DEFAULT_TAIL_TOL) -> TruncatedPmf:
    return _truncated(model, model.c_s, tail_tol)


def _ratio_moment(model: AmcModel, target: np.ndarray, order: int) -> float:
    sa = _sigma_a(model)
    if order == 1:
        x1, x2 = _resolvent(model, target, 2)
        return float(sa @ x2) / float(sa @ x1)
    (x1,) = _resolvent(model, target)
    shifted = model.A @ target + target
    z3 = _resolvent(model, shifted, 3)[-1]
    return float(sa @ z3) / float(sa @ x1)


def aoi_mean(model: AmcModel) -> float:
    return _ratio_moment(model, model.v, 1)


def aoi_second_moment(model: AmcModel) -> float:
    return _ratio_moment(model, model.v, 2)


def paoi_mean(model: AmcModel) -> float:
    return _ratio_moment(model, model.c_s, 1)


def paoi_second_moment(model: AmcModel) -> float:
    return _ratio_moment(model, model.c_s, 2)


def obsolete_probability(model: AmcModel) -> float:
    """Probability that a generated packet is overtaken before it is received."""
    sigma = _require_sigma(model)
    (x,) = _resolvent(model, model.c_u)
    return float(sigma @ x)


def pmf_moment(pmf: TruncatedPmf, order: int) -> float:
    """Raw moment of a truncated PMF with a geometric extrapolation of the tail.

    Beyond ``H`` the masses are continued as ``u(H) r^(h - H)`` where ``r`` is
    the ratio of the last two emitted masses, rescaled to the recorded tail mass.
    """
    u = pmf.values
    h = np.arange(1, u.size + 1, dtype=float)
    body = math.fsum(h**order * u)
    if pmf.tail_mass <= 0 or u.size < 2 or u[-2] <= 0:
        return body
    r = min(u[-1] / u[-2], 1 - 1e-12)
    if r <= 0:
        return body
    # sum_{m>=1} (H+m)^order r^m, truncated once terms are negligible
    H = u.size
    terms, weights = [], []
    m = 1
    while True:
        w = r**m
        weights.append(w)
        terms.append((H + m) ** order * w)
        if w < 1e-18 * max(1.0, sum(weights)) or m > 10**6:
            break
        m += 1
    scale = pmf.tail_mass / math.fsum(weights)
    return body + scale * math.fsum(terms)


def aoi_moment(model: AmcModel, order: int, tail_tol: float = 1e-12) -> float:
    """Arbitrary raw AoI moment from the PMF; orders 1 and 2 use the closed forms."""
    if order == 1:
        return aoi_mean(model)
    if order == 2:
        return aoi_second_moment(model)
    return pmf_moment(aoi_pmf(model, tail_tol), order)


@dataclass
class AoiReport:
    """Exact AoI / peak-AoI summary for one configuration."""

    config: dict
    aoi_mean: float
    aoi_second_moment: float
    aoi_variance: float
    paoi_mean: float
    paoi_second_moment: float
    obsolete_probability: float
    tail_tol: float
    truncation_h: int
    truncated_tail_mass: float
    paoi_truncation_h: int
    paoi_truncated_tail_mass: float
    states: int
    aoi_pmf: np.ndarray = field(repr=False)
    paoi_pmf: np.ndarray = field(repr=False)

    def headline(self) -> dict:
        return {
            "aoi_mean": self.aoi_mean,
            "aoi_second_moment": self.aoi_second_moment,
            "aoi_variance": self.aoi_variance,
            "paoi_mean": self.paoi_mean,
            "paoi_second_moment": self.paoi_second_moment,
            "obsolete_probability": self.obsolete_probability,
        }

    def to_dict(self) -> dict:
        out = asdict(self)
        out["aoi_pmf"] = [[h, float(p)] for h, p in enumerate(self.aoi_pmf, start=1)]
        out["paoi_pmf"] = [[h, float(p)] for h, p in enumerate(self.paoi_pmf, start=1)]
        return out


def analyze(model_or_config, tail_tol: float = DEFAULT_TAIL_TOL) -> AoiReport:
    """Full report for a completed model (or a config, which is built first)."""
    model = build_model(model_or_config) if isinstance(model_or_config, SystemConfig) else model_or_config
    aoi = aoi_pmf(model, tail_tol)
    paoi = paoi_pmf(model, tail_tol)
    mean = aoi_mean(model)
    second = aoi_second_moment(model)
    return AoiReport(
        config=model.config.summary(),
        aoi_mean=mean,
        aoi_second_moment=second,
        aoi_variance=second - mean * mean,
        paoi_mean=paoi_mean(model),
        paoi_second_moment=paoi_second_moment(model),
        obsolete_probability=obsolete_probability(model),
        tail_tol=tail_tol,
        truncation_h=aoi.truncation_h,
        truncated_tail_mass=aoi.tail_mass,
        paoi_truncation_h=paoi.truncation_h,
        paoi_truncated_tail_mass=paoi.tail_mass,
        states=model.M,
        aoi_pmf=aoi.values,
        paoi_pmf=paoi.values,
    )
