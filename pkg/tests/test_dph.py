import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dtdq_aoi.dph import (
    DphDistribution,
    dph_from_pmf,
    dph_from_spec,
    dph_geometric,
    dph_mean,
    dph_pmf,
    dph_pmf_vector,
    dph_sample_many,
    dph_triangular,
    dph_uniform,
    dph_variance,
    expected_max,
    triangular_pmf,
)

pmfs = st.dictionaries(
    st.integers(1, 15), st.floats(0.01, 1.0), min_size=1, max_size=6
).map(lambda d: {w: p / sum(d.values()) for w, p in d.items()})


def test_geometric_closed_form():
    d = dph_geometric(0.25)
    for h in range(1, 20):
        assert dph_pmf(d, h) == pytest.approx(0.25 * 0.75 ** (h - 1), rel=1e-13)
    assert dph_mean(d) == pytest.approx(4.0, rel=1e-13)
    assert dph_variance(d) == pytest.approx(0.75 / 0.25**2, rel=1e-12)


def test_uniform_moments():
    d = dph_uniform(1, 11)
    assert d.order == 11
    assert dph_mean(d) == pytest.approx(6.0, rel=1e-13)
    assert dph_variance(d) == pytest.approx((11**2 - 1) / 12, rel=1e-12)
    assert [dph_pmf(d, h) for h in range(1, 12)] == pytest.approx([1 / 11] * 11, rel=1e-13)
    assert dph_pmf(d, 12) == pytest.approx(0.0, abs=1e-15)


def test_finite_support_construction_shape():
    d = dph_from_pmf({2: 0.5, 4: 0.5})
    assert d.alpha.tolist() == [1.0, 0.0, 0.0, 0.0]
    # pass-through phase for the empty support point 3
    assert d.B[0, 1] == 1.0 and d.B[1, 2] == 0.5 and d.B[2, 3] == 1.0
    assert d.b.tolist() == [0.0, 0.5, 0.0, 1.0]


@given(pmfs)
@settings(max_examples=60, deadline=None)
def test_pmf_round_trip(pmf):
    d = dph_from_pmf(pmf)
    vec = dph_pmf_vector(d)
    for w in range(1, max(pmf) + 1):
        assert vec[w - 1] == pytest.approx(pmf.get(w, 0.0), abs=1e-12)
    mean = sum(w * p for w, p in pmf.items())
    var = sum(w * w * p for w, p in pmf.items()) - mean**2
    assert dph_mean(d) == pytest.approx(mean, rel=1e-10)
    assert dph_variance(d) == pytest.approx(var, rel=1e-8, abs=1e-9)


@pytest.mark.parametrize("mean", [1, 2, 3.5, 6, 9, 13])
@pytest.mark.parametrize("variance", [0.0, 0.5, 2.0, 6.0])
def test_triangular_hits_requested_moments(mean, variance):
    try:
        d = dph_triangular(mean, variance)
    except ValueError as exc:
        assert "attainable" in str(exc)
        return
    assert dph_mean(d) == pytest.approx(mean, rel=1e-12)
    assert dph_variance(d) == pytest.approx(variance, abs=1e-9)
    pmf = triangular_pmf(mean, variance)
    # symmetric about the mean
    for w, p in pmf.items():
        assert pmf.get(int(round(2 * mean - w)), 0.0) == pytest.approx(p, abs=1e-15)


def test_triangular_zero_variance_is_deterministic():
    assert triangular_pmf(13, 0) == {13: 1.0}


def test_triangular_unattainable_variance_names_range():
    with pytest.raises(ValueError, match="nearest attainable"):
        dph_triangular(3, 50)


def test_expected_max_matches_enumeration():
    d1, d2 = dph_uniform(1, 4), dph_uniform(2, 6)
    brute = sum(max(a, b) / 4 / 5 for a in range(1, 5) for b in range(2, 7))
    assert expected_max(d1, d2) == pytest.approx(brute, rel=1e-12)


@pytest.mark.parametrize(
    "alpha, B, match",
    [
        ([0.5, 0.4], [[0.1, 0.1], [0.1, 0.1]], "sum to 1"),
        ([1.0], [[1.0]], "spectral radius"),
        ([1.0, 0.0], [[0.7, 0.5], [0.0, 0.1]], "substochastic"),
        ([1.0], [[0.5, 0.1]], "square"),
        ([1.0], [[-0.2]], r"\[0, 1\]"),
    ],
)
def test_invalid_dph_rejected(alpha, B, match):
    with pytest.raises(ValueError, match=match):
        DphDistribution(alpha, B)


@pytest.mark.parametrize("pmf, match", [({0: 1.0}, "at least one slot"), ({1: 0.5}, "total mass"), ({}, "empty")])
def test_invalid_pmf_rejected(pmf, match):
    with pytest.raises(ValueError, match=match):
        dph_from_pmf(pmf)


def test_sampler_chi_square(rng):
    d = DphDistribution([0.3, 0.7], [[0.2, 0.5], [0.1, 0.6]])
    draws = dph_sample_many(d, 200_000, rng)
    assert draws.min() >= 1
    probs = dph_pmf_vector(d, tail_tol=1e-14)
    top = 25
    observed = np.bincount(draws, minlength=top + 2)[1:]
    obs = np.append(observed[: top - 1], observed[top - 1 :].sum())
    exp = np.append(probs[: top - 1], 1 - probs[: top - 1].sum()) * draws.size
    stat, p = stats.chisquare(obs, exp)
    assert p > 1e-4, (stat, p)


def test_geometric_one_is_unit_service():
    d = dph_geometric(1.0)
    assert dph_pmf(d, 1) == 1.0
    assert dph_mean(d) == 1.0


@pytest.mark.parametrize(
    "spec, mean",
    [
        ({"kind": "geometric", "mean": 4}, 4.0),
        ({"kind": "geometric", "p": 0.5}, 2.0),
        ({"kind": "uniform", "a": 2, "b": 4}, 3.0),
        ({"kind": "triangular", "mean": 5, "variance": 1}, 5.0),
        ({"kind": "deterministic", "value": 7}, 7.0),
        ({"kind": "pmf", "pmf": {1: 0.5, 3: 0.5}}, 2.0),
        ({"kind": "dph", "alpha": [1.0], "B": [[0.75]]}, 4.0),
    ],
)
def test_spec_kinds(spec, mean):
    assert math.isclose(dph_mean(dph_from_spec(spec)), mean, rel_tol=1e-12)


@pytest.mark.parametrize(
    "spec",
    [{"kind": "poisson"}, {"kind": "uniform", "a": 1}, {"kind": "geometric"}, {"kind": "geometric", "p": 0.5, "x": 1}],
)
def test_spec_errors(spec):
    with pytest.raises(ValueError):
        dph_from_spec(spec)
