"""Slot-level Monte Carlo simulation of the dual-server system.

Within a slot, service completions are handled first: the freshest packet
that completes and is newer than everything received so far resets the age,
every other completion is obsolete.  Generation is decided afterwards: a new
packet is sampled when at least ``k`` slots have passed since the previous
one and a server is idle (the priority server when both are).  With ``k = 0``
an idle pair receives the same packet, each copy with its own service time.

Two engines are provided.  :func:`simulate` draws a whole service duration
when a packet starts and reports AoI/PAoI statistics with batch-means
standard errors.  :func:`simulate_amc_initial_census` walks the service
phases slot by slot and records the joint state at every generation and the
server occupancy on every slot, so the analytic ``sigma`` and ``pi`` can be
checked without going through the duration engine.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .amc import S1, SystemConfig
from .dph import DphDistribution, dph_sample_many
from .state_space import enumerate_amc, enumerate_rmc

__all__ = [
    "SimResult",
    "SimTrace",
    "CensusResult",
    "simulate",
    "simulate_amc_initial_census",
    "MIN_SLOTS",
    "RNG_ALGORITHM",
]

logger = logging.getLogger(__name__)

MIN_SLOTS = 10**4
RNG_ALGORITHM = "PCG64 (numpy SeedSequence.spawn, one stream per server role)"
WARMUP_FRACTION = 0.01
DEFAULT_BATCHES = 50

# kernel state vector layout
_T, _BUSY1, _BUSY2, _DONE1, _DONE2, _GEN1, _GEN2, _LAST_GEN, _G_RECV, _POS0, _POS1, _NGEN, _NREC, _NSTART = range(14)
_STATE_LEN = 14
_NEVER = -(1 << 40)


@dataclass
class SimTrace:
    """Per-slot record of a run after warm-up (only filled when requested)."""

    aoi: np.ndarray
    generations: np.ndarray
    # (server, start slot, completion slot) of every packet that entered service
    services: np.ndarray
    # (slot, generation time, up to date) of every reception
    receptions: np.ndarray
    # (slot, peak) of every up-to-date reception
    peaks: np.ndarray
    warmup: int


@dataclass
class SimResult:
    """Monte Carlo estimates for one configuration.

    Standard errors come from batch means over ``batches`` equal slices of
    the post-warm-up run.
    """

    config: dict
    slots: int
    seed: int
    warmup: int
    batches: int
    rng: str
    aoi_mean: float
    aoi_mean_se: float
    aoi_second_moment: float
    aoi_second_moment_se: float
    paoi_mean: float
    paoi_mean_se: float
    paoi_second_moment: float
    paoi_second_moment_se: float
    cycles: int
    obsolete_count: int
    generated: int
    aoi_histogram: np.ndarray = field(repr=False)
    paoi_histogram: np.ndarray = field(repr=False)
    trace: SimTrace | None = field(default=None, repr=False)

    @property
    def obsolete_fraction(self) -> float:
        received = self.cycles + self.obsolete_count
        return self.obsolete_count / received if received else 0.0

    def headline(self) -> dict:
        return {
            "aoi_mean": self.aoi_mean,
            "aoi_mean_se": self.aoi_mean_se,
            "aoi_second_moment": self.aoi_second_moment,
            "aoi_second_moment_se": self.aoi_second_moment_se,
            "paoi_mean": self.paoi_mean,
            "paoi_mean_se": self.paoi_mean_se,
            "obsolete_fraction": self.obsolete_fraction,
        }

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("trace")
        out["obsolete_fraction"] = self.obsolete_fraction
        out["aoi_histogram"] = [[h, int(c)] for h, c in enumerate(self.aoi_histogram) if c]
        out["paoi_histogram"] = [[h, int(c)] for h, c in enumerate(self.paoi_histogram) if c]
        return out


@numba.njit(cache=True)
def _run_slots(
    state, total, warmup, k, prio, buf0, buf1, nb, slots,
    hist, phist, bsum, bsq, bpsum, bpsq, bcyc, counters,
    tracing, aoi_tr, gen_tr, svc_tr, rec_tr, peak_tr,
):
    """Advance the system until ``total`` slots are done or a buffer runs low.

    Returns 1 when finished and 0 when the caller must refill a buffer.
    """
    n0 = buf0.shape[0]
    n1 = buf1.shape[0]
    while state[_T] < total:
        if state[_POS0] + 2 > n0 or state[_POS1] + 2 > n1:
            return 0
        t = state[_T]
        measured = t >= warmup
        rel = t - warmup
        batch = rel * nb // slots if measured else 0

        # completions
        g_old = state[_G_RECV]
        fresh = g_old
        done1 = state[_BUSY1] == 1 and state[_DONE1] == t
        done2 = state[_BUSY2] == 1 and state[_DONE2] == t
        up1 = False
        up2 = False
        if done1 and state[_GEN1] > fresh:
            fresh = state[_GEN1]
            up1 = True
        if done2 and state[_GEN2] > fresh:
            fresh = state[_GEN2]
            up2 = True
            up1 = False
        n_obs = 0
        if done1:
            state[_BUSY1] = 0
            if not up1:
                n_obs += 1
        if done2:
            state[_BUSY2] = 0
            if not up2:
                n_obs += 1
        if tracing and measured:
            if done1:
                rec_tr[state[_NREC], 0] = t
                rec_tr[state[_NREC], 1] = state[_GEN1]
                rec_tr[state[_NREC], 2] = 1 if up1 else 0
                state[_NREC] += 1
            if done2:
                rec_tr[state[_NREC], 0] = t
                rec_tr[state[_NREC], 1] = state[_GEN2]
                rec_tr[state[_NREC], 2] = 1 if up2 else 0
                state[_NREC] += 1
        if up1 or up2:
            peak = t - 1 - g_old
            state[_G_RECV] = fresh
            if measured:
                counters[0] += 1
                if peak < phist.shape[0]:
                    phist[peak] += 1
                bpsum[batch] += peak
                bpsq[batch] += peak * peak
                bcyc[batch] += 1
                if tracing:
                    idx = counters[0] - 1
                    peak_tr[idx, 0] = t
                    peak_tr[idx, 1] = peak
        if measured:
            counters[1] += n_obs

        aoi = t - state[_G_RECV]
        if measured:
            hist[aoi] += 1
            bsum[batch] += aoi
            bsq[batch] += aoi * aoi
            if tracing:
                aoi_tr[rel] = aoi

        # generation
        idle1 = state[_BUSY1] == 0
        idle2 = state[_BUSY2] == 0
        if (idle1 or idle2) and t - state[_LAST_GEN] >= k:
            # role 0 is the priority server
            start1 = False
            start2 = False
            if idle1 and idle2:
                if k == 0:
                    start1 = True
                    start2 = True
                elif prio == 1:
                    start1 = True
                else:
                    start2 = True
            elif idle1:
                start1 = True
            else:
                start2 = True
            if start1:
                if prio == 1:
                    d = buf0[state[_POS0]]
                    state[_POS0] += 1
                else:
                    d = buf1[state[_POS1]]
                    state[_POS1] += 1
                state[_BUSY1] = 1
                state[_DONE1] = t + d
                state[_GEN1] = t
                if tracing and measured:
                    svc_tr[state[_NSTART], 0] = 1
                    svc_tr[state[_NSTART], 1] = t
                    svc_tr[state[_NSTART], 2] = t + d
                    state[_NSTART] += 1
            if start2:
                if prio == 2:
                    d = buf0[state[_POS0]]
                    state[_POS0] += 1
                else:
                    d = buf1[state[_POS1]]
                    state[_POS1] += 1
                state[_BUSY2] = 1
                state[_DONE2] = t + d
                state[_GEN2] = t
                if tracing and measured:
                    svc_tr[state[_NSTART], 0] = 2
                    svc_tr[state[_NSTART], 1] = t
                    svc_tr[state[_NSTART], 2] = t + d
                    state[_NSTART] += 1
            state[_LAST_GEN] = t
            if measured:
                counters[2] += 1
                if tracing:
                    gen_tr[counters[2] - 1] = t
        state[_T] = t + 1
    return 1


def _role_streams(seed: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(2)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def _check_run(config: SystemConfig, slots: int, batches: int) -> None:
    if not isinstance(config, SystemConfig):
        raise TypeError("config must be a SystemConfig")
    if int(slots) != slots or slots < MIN_SLOTS:
        raise ValueError(f"slots must be an integer >= {MIN_SLOTS}, got {slots}")
    if int(batches) != batches or batches < 20:
        raise ValueError(f"at least 20 batches are needed for batch means, got {batches}")


def _batch_se(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1) / np.sqrt(values.size))


def simulate(
    config: SystemConfig,
    slots: int,
    seed: int = 0,
    batches: int = DEFAULT_BATCHES,
    trace: bool = False,
) -> SimResult:
    """Simulate ``slots`` measured slots of ``config`` (``k >= 0``).

    Parameters
    ----------
    config : SystemConfig
        Service laws, freezing parameter and priority.  ``k = 0`` runs the
        zero-wait system.
    slots : int
        Number of measured slots; a further 1% is simulated first and
        discarded as warm-up.
    seed : int
        Root seed.  The priority server and the other server draw from
        separate child streams, so exchanging the server labels together
        with the priority reproduces the run exactly.
    batches : int
        Number of batches for the standard errors.
    trace : bool
        Keep the per-slot age and all events (memory grows with ``slots``).

    Returns
    -------
    SimResult
    """
    _check_run(config, slots, batches)
    slots = int(slots)
    warmup = int(np.ceil(WARMUP_FRACTION * slots))
    total = warmup + slots
    prio = 1 if config.priority is S1 else 2
    # role 0 = priority server, role 1 = the other one
    role_dph = [config.dph1, config.dph2] if prio == 1 else [config.dph2, config.dph1]
    streams = _role_streams(seed)

    state = np.zeros(_STATE_LEN, dtype=np.int64)
    state[_LAST_GEN] = _NEVER
    state[_G_RECV] = -1
    counters = np.zeros(3, dtype=np.int64)
    hist = np.zeros(total + 2, dtype=np.int64)
    phist = np.zeros(total + 2, dtype=np.int64)
    bsum = np.zeros(batches)
    bsq = np.zeros(batches)
    bpsum = np.zeros(batches)
    bpsq = np.zeros(batches)
    bcyc = np.zeros(batches)
    if trace:
        aoi_tr = np.zeros(slots, dtype=np.int64)
        gen_tr = np.zeros(slots + 1, dtype=np.int64)
        svc_tr = np.zeros((2 * slots + 2, 3), dtype=np.int64)
        rec_tr = np.zeros((2 * slots + 2, 3), dtype=np.int64)
        peak_tr = np.zeros((slots + 1, 2), dtype=np.int64)
    else:
        aoi_tr = np.zeros(0, dtype=np.int64)
        gen_tr = np.zeros(0, dtype=np.int64)
        svc_tr = np.zeros((0, 3), dtype=np.int64)
        rec_tr = np.zeros((0, 3), dtype=np.int64)
        peak_tr = np.zeros((0, 2), dtype=np.int64)

    bufs = [np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)]
    while True:
        for role in (0, 1):
            pos = _POS0 + role
            left = bufs[role][state[pos]:]
            remaining = total - int(state[_T])
            chunk = min(remaining + 2, int(1.1 * remaining / role_dph[role].mean()) + 4096)
            fresh = dph_sample_many(role_dph[role], chunk, streams[role])
            bufs[role] = np.concatenate([left, fresh])
            state[pos] = 0
        finished = _run_slots(
            state, total, warmup, config.k, prio, bufs[0], bufs[1], batches, slots,
            hist, phist, bsum, bsq, bpsum, bpsq, bcyc, counters,
            trace, aoi_tr, gen_tr, svc_tr, rec_tr, peak_tr,
        )
        if finished:
            break

    per_slot = slots / batches
    sizes = np.bincount(np.arange(slots) * batches // slots, minlength=batches).astype(float)
    aoi_b = bsum / sizes
    sq_b = bsq / sizes
    cycles = int(counters[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        paoi_b = bpsum / bcyc
        psq_b = bpsq / bcyc
    if cycles and np.all(bcyc > 0):
        paoi_se, psq_se = _batch_se(paoi_b), _batch_se(psq_b)
    else:
        paoi_se = psq_se = float("nan")
    logger.debug("simulated %d slots (%.0f per batch), %d cycles", slots, per_slot, cycles)

    top = np.flatnonzero(hist)
    hist = hist[: top[-1] + 1] if top.size else hist[:1]
    ptop = np.flatnonzero(phist)
    phist = phist[: ptop[-1] + 1] if ptop.size else phist[:1]

    sim_trace = None
    if trace:
        sim_trace = SimTrace(
            aoi=aoi_tr,
            generations=gen_tr[: counters[2]],
            services=svc_tr[: state[_NSTART]],
            receptions=rec_tr[: state[_NREC]],
            peaks=peak_tr[:cycles],
            warmup=warmup,
        )
    return SimResult(
        config=config.summary(),
        slots=slots,
        seed=int(seed),
        warmup=warmup,
        batches=int(batches),
        rng=RNG_ALGORITHM,
        aoi_mean=float(bsum.sum() / slots),
        aoi_mean_se=_batch_se(aoi_b),
        aoi_second_moment=float(bsq.sum() / slots),
        aoi_second_moment_se=_batch_se(sq_b),
        paoi_mean=float(bpsum.sum() / cycles) if cycles else float("nan"),
        paoi_mean_se=paoi_se,
        paoi_second_moment=float(bpsq.sum() / cycles) if cycles else float("nan"),
        paoi_second_moment_se=psq_se,
        cycles=cycles,
        obsolete_count=int(counters[1]),
        generated=int(counters[2]),
        aoi_histogram=hist,
        paoi_histogram=phist,
        trace=sim_trace,
    )


# ----------------------------------------------------------------------------
# phase-level census


@dataclass
class CensusResult:
    """Empirical initial vector and occupancy law from a phase-level run.

    ``sigma``/``sigma_se`` are indexed like the absorbing chain's states and
    ``pi``/``pi_se`` like the recurrent chain's.
    """

    config: dict
    slots: int
    seed: int
    generations: int
    sigma: np.ndarray
    sigma_se: np.ndarray
    sigma_counts: np.ndarray
    pi: np.ndarray
    pi_se: np.ndarray
    batches: int


def _cdf_tables(d: DphDistribution) -> tuple[np.ndarray, np.ndarray]:
    alpha_cdf = np.cumsum(d.alpha)
    alpha_cdf[-1] = 1.0
    step = np.hstack([d.B, d.b[:, None]])
    step_cdf = np.cumsum(step, axis=1)
    step_cdf[:, -1] = 1.0
    return alpha_cdf, step_cdf


@numba.njit(cache=True)
def _draw(cdf, u):
    n = cdf.shape[0]
    for idx in range(n):
        if u < cdf[idx]:
            return idx
    return n - 1


@numba.njit(cache=True)
def _census_slots(
    state, t0, t1, warmup, slots, nb, k, prio, n1, n2,
    a1, s1, a2, s2, u1, u2,
    amc_base, rmc_base, sig_counts, pi_counts,
):
    # state: [phase1, phase2, last_gen]; phases are 1-based, 0 = idle
    for t in range(t0, t1):
        r = t - t0
        p1 = state[0]
        p2 = state[1]
        if p1 > 0:
            nxt = _draw(s1[p1 - 1], u1[r, 0])
            p1 = 0 if nxt == n1 else nxt + 1
        if p2 > 0:
            nxt = _draw(s2[p2 - 1], u2[r, 0])
            p2 = 0 if nxt == n2 else nxt + 1
        measured = t >= warmup
        batch = (t - warmup) * nb // slots if measured else 0
        if (p1 == 0 or p2 == 0) and t - state[2] >= k:
            both = p1 == 0 and p2 == 0
            on1 = (p1 == 0) if not both else prio == 1
            if on1:
                p1 = _draw(a1, u1[r, 1]) + 1
                cls = 5 if both else 1
            else:
                p2 = _draw(a2, u2[r, 1]) + 1
                cls = 6 if both else 4
            state[2] = t
            if measured:
                # classes 1 and 4 are n1*n2 blocks, 5 is n1 x 1, 6 is 1 x n2
                if cls == 5:
                    off = p1 - 1
                elif cls == 6:
                    off = p2 - 1
                else:
                    off = (p1 - 1) * n2 + (p2 - 1)
                sig_counts[batch, amc_base[cls] + off] += 1
        state[0] = p1
        state[1] = p2
        if measured:
            l = t - state[2]
            if l > k - 1:
                l = k - 1
            if p1 == 0 and p2 == 0:
                cls, off, dim = 1, 0, 1
            elif p2 == 0:
                cls, off, dim = 2, p1 - 1, n1
            elif p1 == 0:
                cls, off, dim = 3, p2 - 1, n2
            else:
                cls, off, dim = 4, (p1 - 1) * n2 + (p2 - 1), n1 * n2
            pi_counts[batch, rmc_base[cls] + l * dim + off] += 1


def simulate_amc_initial_census(
    config: SystemConfig, slots: int, seed: int = 0, batches: int = DEFAULT_BATCHES
) -> CensusResult:
    """Empirical ``sigma`` and ``pi`` from a phase-by-phase simulation (``k >= 1``).

    Every generation is classified by the state the absorbing chain would
    start in: fresh packet on S1 with S2 busy (class 1), on S2 with S1 busy
    (class 4), or on the priority server with both idle (class 5 or 6).
    Standard errors are batch means of the per-batch frequency vectors.
    """
    _check_run(config, slots, batches)
    if config.k < 1:
        raise ValueError("the census needs k >= 1; the chains are undefined for k = 0")
    slots = int(slots)
    k = config.k
    n1, n2 = config.dph1.order, config.dph2.order
    amc = enumerate_amc(n1, n2, k)
    rmc = enumerate_rmc(n1, n2, k)
    amc_base = np.zeros(7, dtype=np.int64)
    for cls in (1, 4, 5, 6):
        amc_base[cls] = amc.block(cls, 0).start
    rmc_base = np.zeros(5, dtype=np.int64)
    for cls in (1, 2, 3, 4):
        rmc_base[cls] = rmc.block(cls, 0).start
    a1, s1 = _cdf_tables(config.dph1)
    a2, s2 = _cdf_tables(config.dph2)
    prio = 1 if config.priority is S1 else 2
    streams = _role_streams(seed)
    rng1, rng2 = (streams[0], streams[1]) if prio == 1 else (streams[1], streams[0])

    warmup = int(np.ceil(WARMUP_FRACTION * slots))
    total = warmup + slots
    sig_counts = np.zeros((batches, len(amc)), dtype=np.int64)
    pi_counts = np.zeros((batches, len(rmc)), dtype=np.int64)
    state = np.array([0, 0, _NEVER], dtype=np.int64)
    chunk = 1 << 16
    for t0 in range(0, total, chunk):
        t1 = min(total, t0 + chunk)
        u1 = rng1.random((t1 - t0, 2))
        u2 = rng2.random((t1 - t0, 2))
        _census_slots(
            state, t0, t1, warmup, slots, batches, k, prio, n1, n2,
            a1, s1, a2, s2, u1, u2, amc_base, rmc_base, sig_counts, pi_counts,
        )

    def freq(counts):
        totals = counts.sum(axis=1, keepdims=True)
        per_batch = counts / np.maximum(totals, 1)
        overall = counts.sum(axis=0) / max(counts.sum(), 1)
        se = per_batch.std(axis=0, ddof=1) / np.sqrt(batches)
        return overall, se

    sigma, sigma_se = freq(sig_counts)
    pi, pi_se = freq(pi_counts)
    return CensusResult(
        config=config.summary(),
        slots=slots,
        seed=int(seed),
        generations=int(sig_counts.sum()),
        sigma=sigma,
        sigma_se=sigma_se,
        sigma_counts=sig_counts.sum(axis=0),
        pi=pi,
        pi_se=pi_se,
        batches=int(batches),
    )
