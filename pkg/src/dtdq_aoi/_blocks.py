"""Sparse assembly of chain matrices from per-server Kronecker factors.

Every one-step transition of both chains factorises into an independent move
of server 1 and server 2.  A server move is one of

``B``   busy -> busy, same packet keeps being served
``b``   busy -> idle, packet completes
``ba``  busy -> busy, packet completes and a fresh one starts in phase ``alpha``
``a``   idle -> busy, fresh packet starts in phase ``alpha``
``1``   idle -> idle
``e``   busy -> (summed out), used for absorption vectors

so a rule ``(src, dst, when, dst_clock, f1, f2, priority)`` contributes the
block ``kron(F1, F2)`` from every ``(src, l)`` block to its ``(dst, l')`` block.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .state_space import StateSpace


class Rule(NamedTuple):
    src: int
    dst: int
    when: str  # "lt": l < k-1, "eq": l == k-1, "any": unclocked source
    dst_clock: str  # "next", "zero", "last" or "none"
    f1: str
    f2: str
    priority: object = None


def server_factors(d) -> dict:
    return {
        "B": d.B,
        "b": d.b[:, None],
        "ba": np.outer(d.b, d.alpha),
        "a": d.alpha[None, :],
        "1": np.ones((1, 1)),
        "e": np.ones((d.order, 1)),
    }


def source_clocks(rule: Rule, k: int) -> range:
    if rule.when == "lt":
        return range(0, k - 1)
    if rule.when == "eq":
        return range(k - 1, k)
    return range(0, 1)


def target_clock(rule: Rule, l: int, k: int) -> int:
    return {"next": l + 1, "zero": 0, "last": k - 1, "none": 0}[rule.dst_clock]


def assemble(space: StateSpace, rules, dph1, dph2, priority) -> sp.csr_matrix:
    """Sum all applicable rule blocks into a sparse matrix over ``space``."""
    k = space.k
    f1s, f2s = server_factors(dph1), server_factors(dph2)
    rows, cols, vals = [], [], []
    for rule in rules:
        if rule.priority is not None and rule.priority != priority:
            continue
        block = np.kron(f1s[rule.f1], f2s[rule.f2])
        r_idx, c_idx = np.nonzero(block)
        if r_idx.size == 0:
            continue
        data = block[r_idx, c_idx]
        for l in source_clocks(rule, k):
            src = space.block(rule.src, l)
            dst = space.block(rule.dst, target_clock(rule, l, k))
            rows.append(r_idx + src.start)
            cols.append(c_idx + dst.start)
            vals.append(data)
    n = len(space)
    if not rows:
        return sp.csr_matrix((n, n))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat
