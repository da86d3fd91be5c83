"""Discrete phase-type (DPH) service-time distributions.

A DPH law is the absorption time ``T >= 1`` of a discrete-time Markov chain
with transient block ``B`` entered through the initial vector ``alpha``.
The exit vector is ``b = (I - B) 1`` and ``Pr(T = h) = alpha B^(h-1) b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

__all__ = [
    "DphDistribution",
    "dph_geometric",
    "dph_from_pmf",
    "dph_uniform",
    "dph_triangular",
    "triangular_pmf",
    "dph_pmf",
    "dph_pmf_vector",
    "dph_mean",
    "dph_variance",
    "dph_sample",
    "dph_sample_many",
    "expected_max",
    "dph_from_spec",
]

_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DphDistribution:
    """Immutable DPH law ``(alpha, B)`` of order ``N``.

    ``label`` is free text kept for reports; it plays no role in the maths.
    """

    alpha: np.ndarray
    B: np.ndarray
    label: str = ""
    b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        B = np.array(self.B, dtype=float)
        if B.ndim != 2 or B.shape != (alpha.size, alpha.size) or alpha.size == 0:
            raise ValueError(
                f"alpha has length {alpha.size} but B has shape {B.shape}; "
                "need a square B matching alpha"
            )
        if np.any(alpha < -_TOL) or np.any(alpha > 1 + _TOL):
            raise ValueError("alpha entries must lie in [0, 1]")
        if abs(alpha.sum() - 1.0) > _TOL:
            raise ValueError(
                f"alpha must sum to 1 (got {alpha.sum():.17g}); "
                "mass at time 0 is not allowed"
            )
        if np.any(B < -_TOL) or np.any(B > 1 + _TOL):
            raise ValueError("B entries must lie in [0, 1]")
        rows = B.sum(axis=1)
        if np.any(rows > 1 + _TOL):
            raise ValueError("B must be substochastic (row sums <= 1)")
        alpha = np.clip(alpha, 0.0, 1.0)
        B = np.clip(B, 0.0, 1.0)
        if B.size and np.max(np.abs(np.linalg.eigvals(B))) >= 1 - 1e-13:
            raise ValueError("absorption is not certain: spectral radius of B is 1")
        b = np.clip(1.0 - B.sum(axis=1), 0.0, 1.0)
        for name, value in (("alpha", alpha), ("B", B), ("b", b)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def order(self) -> int:
        return self.alpha.size

    N = order

    def __eq__(self, other):
        if not isinstance(other, DphDistribution):
            return NotImplemented
        return (
            self.alpha.shape == other.alpha.shape
            and np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.B, other.B)
        )

    def __hash__(self):
        return hash((self.alpha.tobytes(), self.B.tobytes()))

    def __repr__(self):
        tag = f" {self.label}" if self.label else ""
        return f"DphDistribution(order={self.order}{tag})"

    def mean(self) -> float:
        return dph_mean(self)

    def variance(self) -> float:
        return dph_variance(self)

    def pmf(self, h: int) -> float:
        return dph_pmf(self, h)


def dph_geometric(p: float) -> DphDistribution:
    """Geometric service ``Pr(T = h) = p (1 - p)^(h - 1)``, i.e. DPH(1, 1 - p)."""
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"geometric success probability must be in (0, 1], got {p}")
    return DphDistribution([1.0], [[1.0 - p]], label=f"geometric(p={p:g})")


def _as_pmf(pmf: Mapping[int, float]) -> dict[int, float]:
    if not pmf:
        raise ValueError("empty pmf")
    out = {}
    for w, prob in pmf.items():
        if isinstance(w, float) and not w.is_integer():
            raise ValueError(f"support value {w} is not an integer")
        w = int(w)
        prob = float(prob)
        if w <= 0 and prob != 0.0:
            raise ValueError(f"mass at w={w} <= 0; service takes at least one slot")
        if prob < 0:
            raise ValueError(f"negative probability {prob} at w={w}")
        if w > 0:
            out[w] = out.get(w, 0.0) + prob
    total = math.fsum(out.values())
    if abs(total - 1.0) > _TOL:
        raise ValueError(f"pmf total mass is {total:.17g}, expected 1")
    return {w: prob / total for w, prob in out.items()}


def dph_from_pmf(pmf: Mapping[int, float], label: str = "") -> DphDistribution:
    """Represent a finite-support PMF on ``{1..N}`` as a DPH.

    ``alpha = e_1`` and ``B`` is zero except the superdiagonal, where
    ``B[w, w+1] = 1 - u(w) / sum_{a >= w} u(a)``.  Interior zero masses give
    pass-through phases with continuation probability one.
    """
    u = _as_pmf(pmf)
    n = max(w for w, prob in u.items() if prob > 0)
    probs = np.zeros(n)
    for w, prob in u.items():
        if w <= n:
            probs[w - 1] = prob
    # tail[w] = sum_{a >= w} u(a), accumulated from the right to stay exact
    tail = np.cumsum(probs[::-1])[::-1]
    B = np.zeros((n, n))
    for w in range(n - 1):
        B[w, w + 1] = 1.0 - probs[w] / tail[w] if tail[w] > 0 else 0.0
    alpha = np.zeros(n)
    alpha[0] = 1.0
    return DphDistribution(alpha, B, label=label or "pmf")


def dph_uniform(a: int, b: int) -> DphDistribution:
    """Discrete uniform service on ``{a, ..., b}``."""
    if int(a) != a or int(b) != b:
        raise ValueError("uniform bounds must be integers")
    a, b = int(a), int(b)
    if a < 1 or b < a:
        raise ValueError(f"need 1 <= a <= b, got a={a}, b={b}")
    n = b - a + 1
    return dph_from_pmf({w: 1.0 / n for w in range(a, b + 1)}, label=f"uniform({a},{b})")


def _triangle(center: Fraction, half: Fraction) -> dict[int, Fraction]:
    lo, hi = center - half, center + half
    weights = {int(w): half + 1 - abs(w - center) for w in range(int(lo), int(hi) + 1)}
    total = sum(weights.values())
    return {w: wt / total for w, wt in weights.items()}


def _triangle_variance(center: Fraction, half: Fraction) -> Fraction:
    pmf = _triangle(center, half)
    return sum(p * (w - center) ** 2 for w, p in pmf.items())


def triangular_pmf(mean: float, variance: float) -> dict[int, float]:
    """Symmetric discrete triangular PMF with the requested mean and variance.

    The family is centred on an integer or half-integer ``mean`` with weights
    ``s + 1 - |w - mean|`` on ``{mean - s, ..., mean + s}``, where the
    half-width ``s`` is an integer (integer mean) or half-integer (half-integer
    mean).  A variance strictly between two half-widths is realised by mixing
    the two neighbouring triangles, which keeps the mean fixed.
    """
    center = Fraction(mean).limit_denominator(1000)
    if center.denominator not in (1, 2) or abs(float(center) - float(mean)) > 1e-12:
        raise ValueError(f"triangular mean must be an integer or half-integer, got {mean}")
    if center < 1:
        raise ValueError(f"triangular mean must be >= 1, got {mean}")
    if variance < 0:
        raise ValueError(f"variance must be nonnegative, got {variance}")
    first = Fraction(0) if center.denominator == 1 else Fraction(1, 2)
    last = center - 1 if center.denominator == 1 else center - Fraction(1, 2)
    halves = []
    s = first
    while s <= last:
        halves.append(s)
        s += 1
    variances = [_triangle_variance(center, s) for s in halves]
    target = Fraction(variance).limit_denominator(10**9)
    if target < variances[0] - Fraction(1, 10**9) or target > variances[-1] + Fraction(1, 10**9):
        nearest = min(variances, key=lambda v: abs(v - target))
        raise ValueError(
            f"variance {variance} is not attainable by a symmetric triangular law with "
            f"mean {mean}; attainable range is [{float(variances[0]):g}, "
            f"{float(variances[-1]):g}], nearest attainable variance {float(nearest):g}"
        )
    for idx, var in enumerate(variances):
        if abs(var - target) <= Fraction(1, 10**9):
            return {w: float(p) for w, p in _triangle(center, halves[idx]).items()}
        if var > target:
            lo_var, hi_var = variances[idx - 1], var
            weight = (hi_var - target) / (hi_var - lo_var)
            low = _triangle(center, halves[idx - 1])
            high = _triangle(center, halves[idx])
            mixed = {w: weight * low.get(w, 0) + (1 - weight) * high.get(w, 0) for w in high}
            return {w: float(p) for w, p in mixed.items()}
    raise AssertionError("unreachable")


def dph_triangular(mean: float, variance: float) -> DphDistribution:
    """DPH for the symmetric discrete triangular law (see :func:`triangular_pmf`)."""
    pmf = triangular_pmf(mean, variance)
    return dph_from_pmf(pmf, label=f"triangular(mean={mean:g},var={variance:g})")


def dph_pmf(d: DphDistribution, h: int) -> float:
    """``Pr(T = h)`` for ``h >= 1``."""
    if int(h) != h or h < 1:
        raise ValueError(f"h must be an integer >= 1, got {h}")
    row = d.alpha @ np.linalg.matrix_power(d.B, int(h) - 1)
    return float(row @ d.b)


def dph_pmf_vector(d: DphDistribution, tail_tol: float = 1e-12, max_h: int = 10**7) -> np.ndarray:
    """PMF values ``[Pr(T=1), Pr(T=2), ...]`` until the survival mass drops below ``tail_tol``."""
    out = []
    row = d.alpha.copy()
    for _ in range(max_h):
        out.append(float(row @ d.b))
        row = row @ d.B
        if row.sum() < tail_tol:
            break
    else:
        raise RuntimeError(f"DPH tail still above {tail_tol} after {max_h} steps")
    return np.array(out)


def dph_mean(d: DphDistribution) -> float:
    """``alpha (I - B)^-1 1``."""
    n = d.order
    x = np.linalg.solve(np.eye(n) - d.B, np.ones(n))
    return float(d.alpha @ x)


def dph_variance(d: DphDistribution) -> float:
    # E[T(T-1)] = 2 alpha B (I-B)^-2 1
    n = d.order
    eye = np.eye(n)
    x1 = np.linalg.solve(eye - d.B, np.ones(n))
    x2 = np.linalg.solve(eye - d.B, x1)
    mean = float(d.alpha @ x1)
    factorial2 = 2.0 * float(d.alpha @ d.B @ x2)
    return max(factorial2 + mean - mean * mean, 0.0)


def _transition_cdf(d: DphDistribution) -> np.ndarray:
    # rows over next phases 0..N-1 followed by absorption
    full = np.hstack([d.B, d.b[:, None]])
    cdf = np.cumsum(full, axis=1)
    cdf[:, -1] = 1.0
    return cdf


def dph_sample_many(d: DphDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` absorption times by running the phase chains side by side."""
    n = int(n)
    out = np.zeros(n, dtype=np.int64)
    if n == 0:
        return out
    alpha_cdf = np.cumsum(d.alpha)
    alpha_cdf[-1] = 1.0
    step_cdf = _transition_cdf(d)
    phase = np.searchsorted(alpha_cdf, rng.random(n), side="right")
    phase = np.minimum(phase, d.order - 1)
    active = np.arange(n)
    t = 0
    absorbed_col = d.order
    while active.size:
        t += 1
        u = rng.random(active.size)
        rows = step_cdf[phase]
        nxt = (u[:, None] >= rows).sum(axis=1)
        done = nxt >= absorbed_col
        out[active[done]] = t
        active = active[~done]
        phase = nxt[~done]
    return out


def dph_sample(d: DphDistribution, rng: np.random.Generator) -> int:
    """Draw one absorption time from a caller-owned generator."""
    return int(dph_sample_many(d, 1, rng)[0])


def expected_max(d1: DphDistribution, d2: DphDistribution, tail_tol: float = 1e-12) -> float:
    """``E[max(T1, T2)]`` for independent service times."""
    p1 = dph_pmf_vector(d1, tail_tol)
    p2 = dph_pmf_vector(d2, tail_tol)
    n = max(p1.size, p2.size)
    c1 = np.cumsum(np.pad(p1, (0, n - p1.size)))
    c2 = np.cumsum(np.pad(p2, (0, n - p2.size)))
    # E[max] = sum_{h>=0} Pr(max > h); F(0) = 0
    f = np.concatenate([[0.0], c1 * c2])
    return float(np.sum(1.0 - np.minimum(f, 1.0)))


def dph_from_spec(spec: Mapping) -> DphDistribution:
    """Build a DPH from a config mapping ``{kind: ..., <parameters>}``.

    Kinds: ``geometric`` (``p`` or ``mean``), ``uniform`` (``a``, ``b``),
    ``triangular`` (``mean``, ``variance``), ``deterministic`` (``value``),
    ``pmf`` (``pmf``: mapping of support value to probability) and ``dph``
    (``alpha``, ``B``).
    """
    if not isinstance(spec, Mapping):
        raise ValueError(f"distribution must be a mapping, got {type(spec).__name__}")
    allowed = {
        "geometric": ({"p", "mean"}, set()),
        "uniform": ({"a", "b"}, {"a", "b"}),
        "triangular": ({"mean", "variance"}, {"mean", "variance"}),
        "deterministic": ({"value"}, {"value"}),
        "pmf": ({"pmf"}, {"pmf"}),
        "dph": ({"alpha", "B"}, {"alpha", "B"}),
    }
    kind = spec.get("kind")
    if kind not in allowed:
        raise ValueError(f"unknown distribution kind {kind!r}; expected one of {sorted(allowed)}")
    keys, required = allowed[kind]
    params = {key: value for key, value in spec.items() if key != "kind"}
    unknown = set(params) - keys
    if unknown:
        raise ValueError(f"unknown key(s) {sorted(unknown)} for {kind} distribution")
    missing = required - set(params)
    if missing:
        raise ValueError(f"missing key(s) {sorted(missing)} for {kind} distribution")
    if kind == "geometric":
        if ("p" in params) == ("mean" in params):
            raise ValueError("geometric distribution needs exactly one of 'p' or 'mean'")
        if "mean" in params:
            mean = float(params["mean"])
            if mean < 1:
                raise ValueError(f"geometric mean must be >= 1, got {mean}")
            return dph_geometric(1.0 / mean)
        return dph_geometric(params["p"])
    if kind == "uniform":
        return dph_uniform(params["a"], params["b"])
    if kind == "triangular":
        return dph_triangular(params["mean"], params["variance"])
    if kind == "deterministic":
        return dph_from_pmf({int(params["value"]): 1.0}, label=f"deterministic({params['value']})")
    if kind == "pmf":
        return dph_from_pmf({int(w): p for w, p in params["pmf"].items()})
    return DphDistribution(params["alpha"], params["B"])
