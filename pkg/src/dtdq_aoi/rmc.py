"""Recurrent server-occupancy chain and the absorbing chain's initial vector.

The recurrent chain tracks which servers are busy, their phases and the
freezing clock.  Its stationary law, read at clock ``k-1``, weighs the ways a
fresh packet can enter the system and hence gives ``sigma``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

from ._blocks import Rule, assemble
from .amc import S1, S2, AmcModel, SystemConfig, build_amc
from .state_space import StateSpace, enumerate_rmc

__all__ = [
    "RmcModel",
    "RMC_RULES",
    "build_rmc",
    "rmc_steady_state",
    "initial_vector",
    "build_model",
]

logger = logging.getLogger(__name__)

# RMC classes: 1 both idle, 2 only S1 busy, 3 only S2 busy, 4 both busy
RMC_RULES = (
    Rule(1, 1, "lt", "next", "1", "1"),
    Rule(1, 2, "eq", "zero", "a", "1", S1),
    Rule(1, 3, "eq", "zero", "1", "a", S2),
    Rule(2, 1, "lt", "next", "b", "1"),
    Rule(2, 2, "eq", "zero", "ba", "1", S1),
    Rule(2, 3, "eq", "zero", "b", "a", S2),
    Rule(2, 2, "lt", "next", "B", "1"),
    Rule(2, 4, "eq", "zero", "B", "a"),
    Rule(3, 1, "lt", "next", "1", "b"),
    Rule(3, 2, "eq", "zero", "a", "b", S1),
    Rule(3, 3, "eq", "zero", "1", "ba", S2),
    Rule(3, 3, "lt", "next", "1", "B"),
    Rule(3, 4, "eq", "zero", "a", "B"),
    # S1 finishes while frozen: no fresh packet, so no alpha factor
    Rule(4, 3, "lt", "next", "b", "B"),
    Rule(4, 4, "eq", "zero", "ba", "B"),
    Rule(4, 1, "lt", "next", "b", "b"),
    Rule(4, 2, "eq", "zero", "ba", "b", S1),
    Rule(4, 3, "eq", "zero", "b", "ba", S2),
    Rule(4, 2, "lt", "next", "B", "b"),
    Rule(4, 4, "eq", "zero", "B", "ba"),
    Rule(4, 4, "lt", "next", "B", "B"),
    Rule(4, 4, "eq", "last", "B", "B"),
)


@dataclass(frozen=True, eq=False)
class RmcModel:
    config: SystemConfig
    space: StateSpace
    W: sp.csr_matrix
    pi: np.ndarray | None = None

    def at_clock(self, cls: int, l: int | None = None) -> np.ndarray:
        """Stationary mass of one ``(cls, l)`` block shaped ``(d1, d2)``; default clock ``k-1``."""
        if self.pi is None:
            raise ValueError("stationary distribution not computed")
        l = self.space.k - 1 if l is None else l
        d1, d2 = self.space.block_dims(cls)
        return self.pi[self.space.block(cls, l)].reshape(d1, d2)


def build_rmc(config: SystemConfig) -> RmcModel:
    if config.k < 1:
        raise ValueError("the recurrent chain is defined for k >= 1 only")
    d1, d2 = config.dph1, config.dph2
    space = enumerate_rmc(d1.order, d2.order, config.k)
    W = assemble(space, RMC_RULES, d1, d2, config.priority)
    return RmcModel(config, space, W)


def _solve_closed(W: sp.csr_matrix) -> np.ndarray:
    n = W.shape[0]
    if n == 1:
        return np.ones(1)
    # rows of (W^T - I) sum to zero, so one of them can carry the normalisation
    system = (W.T - sp.identity(n, format="csr")).tolil()
    system[0, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    return np.asarray(spla.spsolve(system.tocsc(), rhs)).ravel()


def _direct(W: sp.csr_matrix, start: int) -> np.ndarray:
    """Long-run occupancy from ``start``.

    Deterministic service keeps the phase offset between the servers fixed,
    so the chain can have several closed classes; the limit is then the mix of
    their stationary laws weighted by the probability of ending up in each.
    """
    n = W.shape[0]
    reach = np.sort(csgraph.breadth_first_order(W, start, directed=True, return_predecessors=False))
    sub = W[reach][:, reach].tocsr()
    ncomp, labels = csgraph.connected_components(sub, directed=True, connection="strong")
    coo = sub.tocoo()
    leaving = np.zeros(ncomp, dtype=bool)
    leaving[labels[coo.row[labels[coo.row] != labels[coo.col]]]] = True
    closed = [c for c in range(ncomp) if not leaving[c]]
    local_start = int(np.searchsorted(reach, start))
    transient = np.flatnonzero(np.isin(labels, closed, invert=True))
    weights = {}
    if len(closed) == 1:
        weights[closed[0]] = 1.0
    elif labels[local_start] in closed:
        weights[labels[local_start]] = 1.0
    else:
        # absorption probabilities into each closed class from the start state
        pos = {s: idx for idx, s in enumerate(transient)}
        W_tt = sub[transient][:, transient]
        lu = spla.splu((sp.identity(len(transient), format="csc") - W_tt).tocsc())
        for c in closed:
            into = np.asarray(sub[transient][:, labels == c].sum(axis=1)).ravel()
            weights[c] = float(lu.solve(into)[pos[local_start]])
    pi = np.zeros(n)
    for c, weight in weights.items():
        members = np.flatnonzero(labels == c)
        local = _solve_closed(sub[members][:, members].tocsr())
        pi[reach[members]] += weight * local
    return pi


def _power(W: sp.csr_matrix, start: int, tol: float, max_iter: int) -> np.ndarray:
    n = W.shape[0]
    # lazy chain: same limit, aperiodic even for deterministic service
    lazy_t = (0.5 * (W + sp.identity(n, format="csr"))).T.tocsr()
    pi = np.zeros(n)
    pi[start] = 1.0
    for _ in range(max_iter):
        nxt = lazy_t @ pi
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    residual = np.max(np.abs(W.T @ pi - pi))
    raise RuntimeError(f"power iteration did not converge in {max_iter} steps (residual {residual:.3e})")


def rmc_steady_state(
    model: RmcModel, method: str = "direct", tol: float = 1e-12, max_iter: int = 10**6
) -> RmcModel:
    """Long-run law ``pi`` (``pi W = pi``, ``sum(pi) = 1``) of the system started empty.

    The start is "both idle, generation allowed", the state the system is in
    just before the very first packet.
    """
    start = model.space.index_of((1, 0, 0, model.space.k - 1))
    if method == "direct":
        pi = _direct(model.W, start)
    elif method == "power":
        pi = _power(model.W, start, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    if np.any(pi < -1e-10) or not np.all(np.isfinite(pi)):
        raise RuntimeError("stationary solve produced an invalid vector")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.max(np.abs(model.W.T @ pi - pi)))
    if residual > 1e-10:
        raise RuntimeError(f"stationary solve residual {residual:.3e} exceeds 1e-10")
    return replace(model, pi=pi)


def initial_vector(rmc: RmcModel, amc: AmcModel, config: SystemConfig | None = None) -> np.ndarray:
    """Distribution of the absorbing chain's state at the generation of ``P*``.

    Fresh packets can only be generated on a slot that follows clock ``k-1``.
    Weighing each such generation by the stationary mass it comes from gives
    unnormalised masses for the four entry classes: fresh packet on S1 while
    S2 is busy (class 1), on S2 while S1 is busy (class 4), and on the
    priority server when both are idle (class 5 or 6).
    """
    config = config or amc.config
    d1, d2 = config.dph1, config.dph2
    a1, B1, b1 = d1.alpha, d1.B, d1.b
    a2, B2, b2 = d2.alpha, d2.B, d2.b
    p1 = rmc.at_clock(1)[0, 0]
    p2 = rmc.at_clock(2)[:, 0]
    p3 = rmc.at_clock(3)[0, :]
    p4 = rmc.at_clock(4)

    q1 = np.outer(a1, p3 @ B2 + (b1 @ p4) @ B2)
    q4 = np.outer(p2 @ B1 + (p4 @ b2) @ B1, a2)
    both_idle = p1 + p2 @ b1 + p3 @ b2 + b1 @ p4 @ b2
    space = amc.space
    sigma = np.zeros(len(space))
    sigma[space.block(1, 0)] = q1.ravel()
    sigma[space.block(4, 0)] = q4.ravel()
    if config.priority is S1:
        sigma[space.block(5, 0)] = a1 * both_idle
    else:
        sigma[space.block(6, 0)] = a2 * both_idle
    total = sigma.sum()
    if not total > 0:
        raise RuntimeError("no packet generation mass in the stationary law")
    return sigma / total


def build_model(config: SystemConfig, method: str = "direct") -> AmcModel:
    """Absorbing chain for ``config`` with ``sigma`` installed."""
    amc = build_amc(config)
    rmc = rmc_steady_state(build_rmc(config), method=method)
    return amc.with_sigma(initial_vector(rmc, amc, config))
