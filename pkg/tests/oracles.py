"""Independent reference implementations used only by the tests.

The one-step oracles re-derive the chains from the physical slot semantics
(explicit generation times, completions first, then generation) instead of
from the transition tables, and enumerate every branch exactly.
"""

from __future__ import annotations

import itertools

import numpy as np

from dtdq_aoi.amc import S1
from dtdq_aoi.dph import DphDistribution

# Table 1 occupancy rules written out independently of the package
AMC_RULES_TEXT = {
    1: ("busy", "busy", True), 2: ("busy", "busy", True), 3: ("busy", "busy", True), 4: ("busy", "busy", True),
    5: ("busy", "idle", True), 6: ("idle", "busy", True), 7: ("idle", "idle", True),
    8: ("busy", "busy", False), 9: ("busy", "idle", True), 10: ("idle", "busy", True),
    11: ("busy", "busy", True), 12: ("busy", "busy", True), 13: ("busy", "idle", True),
    14: ("idle", "busy", True),
}


def brute_force_amc_states(n1, n2, k):
    out = []
    for cls in range(1, 15):
        for i in range(n1 + 1):
            for j in range(n2 + 1):
                for l in range(k):
                    s1, s2, clocked = AMC_RULES_TEXT[cls]
                    if (s1 == "busy") != (i >= 1) or (s2 == "busy") != (j >= 1):
                        continue
                    if not clocked and l != 0:
                        continue
                    out.append((cls, i, j, l))
    return out


def brute_force_rmc_states(n1, n2, k):
    return [
        (cls, i, j, l)
        for cls, (b1, b2) in {1: (0, 0), 2: (1, 0), 3: (0, 1), 4: (1, 1)}.items()
        for i in (range(1, n1 + 1) if b1 else [0])
        for j in (range(1, n2 + 1) if b2 else [0])
        for l in range(k)
    ]


def random_dph(rng: np.random.Generator, order: int, max_row: float = 0.9) -> DphDistribution:
    """Random DPH with dense B whose row sums lie in [0.05, max_row]."""
    alpha = rng.dirichlet(np.ones(order))
    B = rng.random((order, order))
    rows = rng.uniform(0.05, max_row, size=order)
    B = B / B.sum(axis=1, keepdims=True) * rows[:, None]
    return DphDistribution(alpha, B)


# --- physical one-step semantics -------------------------------------------------

def _server_moves(d: DphDistribution, phase: int):
    """(next phase or 0 for completion, probability) for a busy server."""
    moves = [(nxt + 1, d.B[phase - 1, nxt]) for nxt in range(d.order) if d.B[phase - 1, nxt] > 0]
    if d.b[phase - 1] > 0:
        moves.append((0, d.b[phase - 1]))
    return moves


def _starts(d: DphDistribution):
    return [(ph + 1, d.alpha[ph]) for ph in range(d.order) if d.alpha[ph] > 0]


def _physical(state):
    """Representative physical configuration of an AMC state.

    Generation times: P* = 0, an older packet = -1, newer packets > 0.
    ``gr`` is the freshest generation time received so far.
    """
    cls, i, j, l = state
    p = {"ph": [i, j], "gen": [None, None], "gr": -2, "received": False, "l": l}
    if cls in (1, 2, 5):
        p["gen"][0] = 0
        p["gen"][1] = {1: -1, 2: 1, 5: None}[cls]
    elif cls in (3, 4, 6):
        p["gen"][1] = 0
        p["gen"][0] = {3: 1, 4: -1, 6: None}[cls]
    else:
        p["received"] = True
        p["gr"] = 0
        up, obs = 1, -1
        p["gen"] = {
            7: [None, None], 8: [up, up + 1], 9: [obs, None], 10: [None, obs],
            11: [up, obs], 12: [obs, up], 13: [up, None], 14: [None, up],
        }[cls]
    return p


def _classify(ph, gen, gr, received, l):
    if not received:
        holder = 0 if gen[0] == 0 else 1
        other = gen[1 - holder]
        if other is None:
            cls = 5 if holder == 0 else 6
        elif other < 0:
            cls = 1 if holder == 0 else 4
        else:
            cls = 2 if holder == 0 else 3
        return (cls, ph[0], ph[1], l)
    tags = tuple("idle" if g is None else ("up" if g > gr else "obs") for g in gen)
    cls = {
        ("idle", "idle"): 7, ("up", "up"): 8, ("obs", "idle"): 9, ("idle", "obs"): 10,
        ("up", "obs"): 11, ("obs", "up"): 12, ("up", "idle"): 13, ("idle", "up"): 14,
    }[tags]
    return (cls, ph[0], ph[1], 0 if cls == 8 else l)


def amc_one_step(state, config):
    """Exact one-step law from an AMC state: dict target -> probability.

    Targets are AMC state tuples or the strings "15" (next up-to-date
    reception after P* was received) and "16" (P* overtaken).
    """
    d = [config.dph1, config.dph2]
    k = config.k
    p = _physical(state)
    out = {}
    options = []
    for s in (0, 1):
        if p["ph"][s] == 0:
            options.append([(0, 1.0, False)])
        else:
            options.append([(nxt, pr, nxt == 0) for nxt, pr in _server_moves(d[s], p["ph"][s])])
    for (n1, p1, c1), (n2, p2, c2) in itertools.product(*options):
        prob = p1 * p2
        ph = [n1, n2]
        gen = list(p["gen"])
        done = [c1, c2]
        gr = p["gr"]
        received = p["received"]
        completed = [gen[s] for s in (0, 1) if done[s]]
        for s in (0, 1):
            if done[s]:
                gen[s] = None
        target = None
        if not received:
            newer = [g for g in completed if g > 0]
            if newer:
                target = "16"
            elif 0 in completed:
                received = True
                gr = 0
        else:
            if any(g > gr for g in completed):
                target = "15"
        if target is not None:
            out[target] = out.get(target, 0.0) + prob
            continue
        idle = [ph[s] == 0 for s in (0, 1)]
        can_generate = p["l"] == k - 1 and any(idle)
        if not can_generate:
            nl = min(p["l"] + 1, k - 1)
            key = _classify(ph, gen, gr, received, nl)
            out[key] = out.get(key, 0.0) + prob
            continue
        if all(idle):
            srv = 0 if config.priority is S1 else 1
        else:
            srv = 0 if idle[0] else 1
        newest = max([g for g in gen if g is not None] + [gr, 0]) + 1
        for start, pa in _starts(d[srv]):
            ph2 = list(ph)
            gen2 = list(gen)
            ph2[srv] = start
            gen2[srv] = newest
            key = _classify(ph2, gen2, gr, received, 0)
            out[key] = out.get(key, 0.0) + prob * pa
    return out


def rmc_one_step(state, config):
    """Exact one-step law of the occupancy chain plus generation events.

    Returns ``(law, births)`` where ``law`` maps RMC states to probabilities
    and ``births`` maps the AMC initial state created by a generation in
    this step to its probability.
    """
    d = [config.dph1, config.dph2]
    k = config.k
    cls, i, j, l = state
    law, births = {}, {}
    options = []
    for s, ph in enumerate((i, j)):
        options.append([(0, 1.0)] if ph == 0 else _server_moves(d[s], ph))
    for (n1, p1), (n2, p2) in itertools.product(*options):
        prob = p1 * p2
        ph = [n1, n2]
        idle = [ph[0] == 0, ph[1] == 0]
        if not (l == k - 1 and any(idle)):
            nl = min(l + 1, k - 1)
            key = (_rmc_class(ph), ph[0], ph[1], nl)
            law[key] = law.get(key, 0.0) + prob
            continue
        both = all(idle)
        srv = (0 if config.priority is S1 else 1) if both else (0 if idle[0] else 1)
        for start, pa in _starts(d[srv]):
            ph2 = list(ph)
            ph2[srv] = start
            key = (_rmc_class(ph2), ph2[0], ph2[1], 0)
            law[key] = law.get(key, 0.0) + prob * pa
            if both:
                birth = (5, ph2[0], 0, 0) if srv == 0 else (6, 0, ph2[1], 0)
            else:
                birth = (1, ph2[0], ph2[1], 0) if srv == 0 else (4, ph2[0], ph2[1], 0)
            births[birth] = births.get(birth, 0.0) + prob * pa
    return law, births


def _rmc_class(ph):
    return {(False, False): 1, (True, False): 2, (False, True): 3, (True, True): 4}[(ph[0] > 0, ph[1] > 0)]


def amc_matrix_from_oracle(space, config):
    """Dense ``[A | c_s | c_u]`` rebuilt from :func:`amc_one_step`."""
    n = len(space)
    A = np.zeros((n, n))
    cs = np.zeros(n)
    cu = np.zeros(n)
    for r, state in enumerate(space.states):
        for target, pr in amc_one_step(tuple(state), config).items():
            if target == "15":
                cs[r] += pr
            elif target == "16":
                cu[r] += pr
            else:
                A[r, space.index_of(target)] += pr
    return A, cs, cu


def simulate_one_step(state, config, trials, rng):
    """Monte Carlo tally of one-step transitions from an AMC state.

    Each server's move and the start phase of a fresh packet are drawn with
    uniforms; every distinct draw is then pushed through the slot rules.
    """
    d = [config.dph1, config.dph2]
    p = _physical(state)
    u = rng.random((trials, 3))
    picks = np.zeros((trials, 2), dtype=np.int64)
    for s in (0, 1):
        if p["ph"][s] == 0:
            continue
        moves = _server_moves(d[s], p["ph"][s])
        c = np.cumsum([m[1] for m in moves])
        idx = np.minimum(np.searchsorted(c, u[:, s], side="right"), len(moves) - 1)
        picks[:, s] = np.array([m[0] for m in moves])[idx]
    # only the start phase of the server that would take a fresh packet matters
    alpha_idx = np.stack([
        np.minimum(np.searchsorted(np.cumsum(d[s].alpha), u[:, 2], side="right"), d[s].order - 1)
        for s in (0, 1)
    ], axis=1)
    o1, o2 = d[0].order, d[1].order
    code = ((picks[:, 0] * (o2 + 1) + picks[:, 1]) * o1 + alpha_idx[:, 0]) * o2 + alpha_idx[:, 1]
    counts = np.bincount(code)
    out = {}
    for key in np.flatnonzero(counts):
        c = int(key)
        a2, c = c % o2, c // o2
        a1, c = c % o1, c // o1
        n2, n1 = c % (o2 + 1), c // (o2 + 1)
        target = _branch_target(state, config, [n1, n2], (a1, a2))
        out[target] = out.get(target, 0) + int(counts[key])
    return out


def _branch_target(state, config, picks, start_idx):
    k = config.k
    p = _physical(state)
    ph = list(picks)
    gen = list(p["gen"])
    done = [p["ph"][s] > 0 and ph[s] == 0 for s in (0, 1)]
    gr, received = p["gr"], p["received"]
    completed = [gen[s] for s in (0, 1) if done[s]]
    for s in (0, 1):
        if done[s]:
            gen[s] = None
    if not received:
        if any(g > 0 for g in completed):
            return "16"
        if 0 in completed:
            received, gr = True, 0
    elif any(g > gr for g in completed):
        return "15"
    idle = [ph[s] == 0 for s in (0, 1)]
    if not (p["l"] == k - 1 and any(idle)):
        return _classify(ph, gen, gr, received, min(p["l"] + 1, k - 1))
    srv = (0 if config.priority is S1 else 1) if all(idle) else (0 if idle[0] else 1)
    ph[srv] = start_idx[srv] + 1
    gen[srv] = max([g for g in gen if g is not None] + [gr, 0]) + 1
    return _classify(ph, gen, gr, received, 0)


# --- pure-Python slot loop ---------------------------------------------------------

def slot_loop(draw, k, priority, slots):
    """Plain reimplementation of the slot rules.

    ``draw(server)`` returns a service time for server 0 or 1.  Returns the
    AoI per slot and the peak recorded at every up-to-date reception.
    """
    busy = [None, None]  # (generation slot, completion slot)
    last_gen = None
    g_recv = 0
    aoi, peaks = [], []
    prio = 0 if priority is S1 else 1
    for t in range(slots):
        done = [s for s in (0, 1) if busy[s] is not None and busy[s][1] == t]
        fresh = [busy[s][0] for s in done if busy[s][0] > g_recv]
        if fresh:
            peaks.append(t - 1 - g_recv)
            g_recv = max(fresh)
        for s in done:
            busy[s] = None
        idle = [s for s in (0, 1) if busy[s] is None]
        if idle and (last_gen is None or t - last_gen >= k):
            if len(idle) == 2 and k == 0:
                targets = [0, 1]
            elif len(idle) == 2:
                targets = [prio]
            else:
                targets = idle
            for s in targets:
                busy[s] = (t, t + draw(s))
            last_gen = t
        aoi.append(t - g_recv)
    return aoi, peaks


def periodic_pmfs(v1, v2, k, priority, horizon=20000):
    """Exact long-run AoI and PAoI PMFs for deterministic service times ``v1``, ``v2``.

    The deterministic path is eventually periodic; the second half of a long
    run is trimmed to a whole number of periods before counting.
    """
    aoi, peaks = slot_loop(lambda s: (v1, v2)[s], k, priority, horizon)
    tail = np.array(aoi[horizon // 2 :])
    period = next(p for p in range(1, len(tail) // 4) if np.array_equal(tail[p:], tail[:-p]))
    window = tail[: period * (len(tail) // period)]
    a = np.bincount(window) / window.size
    # peaks repeat with the same period structure
    pk = np.array(peaks[len(peaks) // 2 :])
    pp = next(p for p in range(1, len(pk) // 4) if np.array_equal(pk[p:], pk[:-p]))
    pwin = pk[: pp * (len(pk) // pp)]
    return a, np.bincount(pwin) / pwin.size
