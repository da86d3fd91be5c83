import numpy as np
import pytest

from dtdq_aoi import S1, S2, SystemConfig, aoi_mean, build_model, dph_from_pmf, dph_geometric, dph_uniform, simulate
from dtdq_aoi.metrics import aoi_second_moment, paoi_mean
from oracles import random_dph, slot_loop

SLOTS = 20_000


@pytest.fixture(scope="module", params=[(S1, 3), (S2, 1), (S1, 0)], ids=["S1-k3", "S2-k1", "S1-k0"])
def traced(request):
    prio, k = request.param
    rng = np.random.default_rng(5)
    cfg = SystemConfig(random_dph(rng, 3), dph_uniform(2, 6), k, prio)
    return cfg, simulate(cfg, SLOTS, seed=9, trace=True)


def test_histogram_counts_every_slot(traced):
    _, res = traced
    assert res.aoi_histogram.sum() == SLOTS
    assert res.paoi_histogram.sum() == res.cycles
    assert len(res.trace.aoi) == SLOTS


def test_generation_spacing_respects_freezing(traced):
    cfg, res = traced
    gaps = np.diff(res.trace.generations)
    assert gaps.min() >= max(cfg.k, 1)


def test_servers_are_not_preempted(traced):
    _, res = traced
    svc = res.trace.services
    assert np.all(svc[:, 2] > svc[:, 1])
    for server in (1, 2):
        rows = svc[svc[:, 0] == server]
        assert np.all(rows[1:, 1] >= rows[:-1, 2])


def test_duplicates_only_at_zero_wait(traced):
    cfg, res = traced
    svc = res.trace.services
    starts, counts = np.unique(svc[:, 1], return_counts=True)
    if cfg.k == 0:
        assert counts.max() == 2
    else:
        assert counts.max() == 1


def test_age_follows_receptions(traced):
    _, res = traced
    tr = res.trace
    aoi = tr.aoi
    fresh = tr.receptions[tr.receptions[:, 2] == 1]
    assert np.all(np.diff(fresh[:, 1]) > 0)
    reset = np.zeros(SLOTS, dtype=bool)
    reset[fresh[:, 0] - tr.warmup] = True
    # between fresh receptions the age grows by one slot at a time
    assert np.all(aoi[1:][~reset[1:]] == aoi[:-1][~reset[1:]] + 1)
    # at a fresh reception it drops to the age of the received packet
    np.testing.assert_array_equal(aoi[fresh[:, 0] - tr.warmup], fresh[:, 0] - fresh[:, 1])
    assert np.all(aoi >= 1)


def test_peaks_dominate_their_cycle(traced):
    _, res = traced
    tr = res.trace
    peaks = tr.peaks
    for (s0, _), (s1, p1) in zip(peaks[:-1], peaks[1:]):
        window = tr.aoi[s0 - tr.warmup : s1 - tr.warmup]
        assert p1 == window.max() == tr.aoi[s1 - 1 - tr.warmup]


def test_obsolete_accounting(traced):
    _, res = traced
    rec = res.trace.receptions
    assert res.obsolete_count == int((rec[:, 2] == 0).sum())
    assert res.cycles == int((rec[:, 2] == 1).sum())


def test_reproducible_and_seed_sensitive(mixed_config):
    a = simulate(mixed_config, 30_000, seed=4).to_dict()
    b = simulate(mixed_config, 30_000, seed=4).to_dict()
    c = simulate(mixed_config, 30_000, seed=5).to_dict()
    assert a == b
    assert a["aoi_histogram"] != c["aoi_histogram"]


@pytest.mark.parametrize("k", [0, 2])
def test_relabelling_is_bit_exact(k, rng):
    cfg = SystemConfig(random_dph(rng, 2), dph_geometric(0.35), k, S2)
    a, b = simulate(cfg, 50_000, seed=1), simulate(cfg.swapped(), 50_000, seed=1)
    for key in ("aoi_mean", "aoi_second_moment", "paoi_mean", "cycles", "obsolete_count", "generated"):
        assert getattr(a, key) == getattr(b, key), key
    np.testing.assert_array_equal(a.aoi_histogram, b.aoi_histogram)


def test_zero_wait_deterministic_thirteen():
    d = dph_from_pmf({13: 1.0})
    res = simulate(SystemConfig(d, d, 0), 13 * 10_000)
    assert res.aoi_mean == pytest.approx(19.0, abs=1e-9)
    assert res.aoi_mean_se < 1e-3


def test_deterministic_matches_exact_value():
    d = dph_from_pmf({12: 1.0})
    res = simulate(SystemConfig(d, d, 6), 12 * 10_000)
    assert res.aoi_mean == pytest.approx(14.5, abs=1e-9)
    assert res.paoi_mean == pytest.approx(17.0, abs=1e-9)


@pytest.mark.parametrize("prio", [S1, S2])
def test_agrees_with_analytic(prio):
    cfg = SystemConfig(dph_uniform(1, 5), dph_geometric(0.25), 2, prio)
    res = simulate(cfg, 300_000, seed=21)
    model = build_model(cfg)
    assert abs(res.aoi_mean - aoi_mean(model)) <= 4 * res.aoi_mean_se
    assert abs(res.aoi_second_moment - aoi_second_moment(model)) <= 4 * res.aoi_second_moment_se
    assert abs(res.paoi_mean - paoi_mean(model)) <= 4 * res.paoi_mean_se


def test_reference_slot_loop_agrees_in_distribution():
    # the plain Python loop and the compiled kernel share only the rules
    cfg = SystemConfig(dph_uniform(1, 4), dph_uniform(2, 5), 1, S1)
    rng = np.random.default_rng(2)
    aoi, _ = slot_loop(lambda s: int(rng.integers(1, 5)) if s == 0 else int(rng.integers(2, 6)), 1, S1, 200_000)
    ref = np.mean(aoi[2000:])
    res = simulate(cfg, 200_000, seed=2)
    assert abs(ref - res.aoi_mean) < 6 * res.aoi_mean_se
    assert abs(ref - aoi_mean(build_model(cfg))) < 6 * res.aoi_mean_se


@pytest.mark.parametrize("slots, batches, match", [(9_999, 50, "slots"), (10**4, 10, "batches")])
def test_run_length_checks(geo_config, slots, batches, match):
    with pytest.raises(ValueError, match=match):
        simulate(geo_config, slots, batches=batches)


def test_summary_fields(geo_config):
    res = simulate(geo_config, 10**4)
    doc = res.to_dict()
    assert doc["warmup"] == 100 and doc["slots"] == 10**4
    assert "PCG64" in doc["rng"]
    assert 0 <= res.obsolete_fraction < 1
    assert set(res.headline()) <= set(doc)
