"""Absorbing Markov chain started at the generation of a tagged packet ``P*``.

The chain has transient matrix ``A``, exit vector ``c_s`` into the successful
absorbing state (the next up-to-date reception after ``P*`` was received) and
``c_u`` into the unsuccessful one (``P*`` overtaken by a newer packet).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ._blocks import Rule, assemble, server_factors
from .dph import DphDistribution
from .state_space import StateSpace, enumerate_amc

__all__ = [
    "Priority",
    "SystemConfig",
    "AmcModel",
    "AMC_RULES",
    "build_amc",
    "validate_amc",
    "NON_PSTAR_CLASSES",
]


class Priority(enum.Enum):
    """Which server takes a fresh packet when both are idle."""

    S1_PRIORITY = "S1"
    S2_PRIORITY = "S2"

    @classmethod
    def parse(cls, value) -> "Priority":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper().replace("_PRIORITY", "")
        for member in cls:
            if member.value == text:
                return member
        raise ValueError(f"unknown priority {value!r}; expected S1 or S2")

    def swapped(self) -> "Priority":
        return Priority.S2_PRIORITY if self is Priority.S1_PRIORITY else Priority.S1_PRIORITY


S1 = Priority.S1_PRIORITY
S2 = Priority.S2_PRIORITY


@dataclass(frozen=True)
class SystemConfig:
    """Two-server system: service laws, freezing parameter ``k`` and priority."""

    dph1: DphDistribution
    dph2: DphDistribution
    k: int
    priority: Priority = S1

    def __post_init__(self):
        if not isinstance(self.dph1, DphDistribution) or not isinstance(self.dph2, DphDistribution):
            raise TypeError("dph1 and dph2 must be DphDistribution instances")
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"freezing parameter k must be a nonnegative integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "priority", Priority.parse(self.priority))

    def with_k(self, k: int) -> "SystemConfig":
        return replace(self, k=k)

    def swapped(self) -> "SystemConfig":
        """Same system with the server labels exchanged."""
        return SystemConfig(self.dph2, self.dph1, self.k, self.priority.swapped())

    def summary(self) -> dict:
        return {
            "dph1": self.dph1.label or f"order {self.dph1.order}",
            "dph2": self.dph2.label or f"order {self.dph2.order}",
            "mean1": self.dph1.mean(),
            "mean2": self.dph2.mean(),
            "k": self.k,
            "priority": self.priority.value,
        }


# Table of one-step moves.  "lt" rules fire while frozen (l < k-1) and advance
# the clock; "eq" rules fire once the clock sits at k-1, where a server that is
# idle after this slot's completions takes a fresh packet and resets the clock.
AMC_RULES = (
    # P* on S1, S2 older
    Rule(1, 10, "lt", "next", "b", "B"),
    Rule(1, 11, "eq", "zero", "ba", "B"),
    Rule(1, 7, "lt", "next", "b", "b"),
    Rule(1, 13, "eq", "zero", "ba", "b", S1),
    Rule(1, 14, "eq", "zero", "b", "ba", S2),
    Rule(1, 5, "lt", "next", "B", "b"),
    Rule(1, 2, "eq", "zero", "B", "ba"),
    Rule(1, 1, "lt", "next", "B", "B"),
    Rule(1, 1, "eq", "last", "B", "B"),
    # P* on S1, S2 newer
    Rule(2, 14, "lt", "next", "b", "B"),
    Rule(2, 8, "eq", "none", "ba", "B"),
    Rule(2, 2, "lt", "next", "B", "B"),
    Rule(2, 2, "eq", "last", "B", "B"),
    # P* on S2, S1 newer
    Rule(3, 13, "lt", "next", "B", "b"),
    Rule(3, 8, "eq", "none", "B", "ba"),
    Rule(3, 3, "lt", "next", "B", "B"),
    Rule(3, 3, "eq", "last", "B", "B"),
    # P* on S2, S1 older
    Rule(4, 6, "lt", "next", "b", "B"),
    Rule(4, 3, "eq", "zero", "ba", "B"),
    Rule(4, 7, "lt", "next", "b", "b"),
    Rule(4, 13, "eq", "zero", "ba", "b", S1),
    Rule(4, 14, "eq", "zero", "b", "ba", S2),
    Rule(4, 9, "lt", "next", "B", "b"),
    Rule(4, 12, "eq", "zero", "B", "ba"),
    Rule(4, 4, "lt", "next", "B", "B"),
    Rule(4, 4, "eq", "last", "B", "B"),
    # P* on S1, S2 idle
    Rule(5, 7, "lt", "next", "b", "1"),
    Rule(5, 13, "eq", "zero", "ba", "1", S1),
    Rule(5, 14, "eq", "zero", "b", "a", S2),
    Rule(5, 5, "lt", "next", "B", "1"),
    Rule(5, 2, "eq", "zero", "B", "a"),
    # P* on S2, S1 idle
    Rule(6, 7, "lt", "next", "1", "b"),
    Rule(6, 13, "eq", "zero", "a", "b", S1),
    Rule(6, 14, "eq", "zero", "1", "ba", S2),
    Rule(6, 6, "lt", "next", "1", "B"),
    Rule(6, 3, "eq", "zero", "a", "B"),
    # both idle
    Rule(7, 7, "lt", "next", "1", "1"),
    Rule(7, 13, "eq", "zero", "a", "1", S1),
    Rule(7, 14, "eq", "zero", "1", "a", S2),
    # two up-to-date packets in service
    Rule(8, 8, "any", "none", "B", "B"),
    # S1 obsolete, S2 idle
    Rule(9, 7, "lt", "next", "b", "1"),
    Rule(9, 13, "eq", "zero", "ba", "1", S1),
    Rule(9, 14, "eq", "zero", "b", "a", S2),
    Rule(9, 9, "lt", "next", "B", "1"),
    Rule(9, 12, "eq", "zero", "B", "a"),
    # S2 obsolete, S1 idle; the S2-priority factor is b(2) alpha(2)
    Rule(10, 7, "lt", "next", "1", "b"),
    Rule(10, 13, "eq", "zero", "a", "b", S1),
    Rule(10, 14, "eq", "zero", "1", "ba", S2),
    Rule(10, 10, "lt", "next", "1", "B"),
    Rule(10, 11, "eq", "zero", "a", "B"),
    # S1 up to date, S2 obsolete
    Rule(11, 13, "lt", "next", "B", "b"),
    Rule(11, 8, "eq", "none", "B", "ba"),
    Rule(11, 11, "lt", "next", "B", "B"),
    Rule(11, 11, "eq", "last", "B", "B"),
    # S2 up to date, S1 obsolete
    Rule(12, 14, "lt", "next", "b", "B"),
    Rule(12, 8, "eq", "none", "ba", "B"),
    Rule(12, 12, "lt", "next", "B", "B"),
    Rule(12, 12, "eq", "last", "B", "B"),
    # S1 up to date, S2 idle
    Rule(13, 13, "lt", "next", "B", "1"),
    Rule(13, 8, "eq", "none", "B", "a"),
    # S2 up to date, S1 idle
    Rule(14, 14, "lt", "next", "1", "B"),
    Rule(14, 8, "eq", "none", "a", "B"),
)

NON_PSTAR_CLASSES = frozenset(range(7, 15))
_CU_CLASSES = frozenset({2, 3})
_CS_CLASSES = frozenset({8, 11, 12, 13, 14})


@dataclass(frozen=True, eq=False)
class AmcModel:
    """Transient structure of the absorbing chain plus its initial vector.

    ``sigma`` is ``None`` until filled in from the recurrent chain.
    """

    config: SystemConfig
    space: StateSpace
    A: sp.csr_matrix
    c_s: np.ndarray
    c_u: np.ndarray
    v: np.ndarray
    sigma: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def M(self) -> int:
        return len(self.space)

    def with_sigma(self, sigma) -> "AmcModel":
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (self.M,):
            raise ValueError(f"sigma has shape {sigma.shape}, expected ({self.M},)")
        return replace(self, sigma=sigma, _cache={})

    @property
    def complete(self) -> bool:
        return self.sigma is not None


def _exit_vector(space: StateSpace, dph1, dph2, by_class: dict) -> np.ndarray:
    f1, f2 = server_factors(dph1), server_factors(dph2)
    out = np.zeros(len(space))
    for (cls, l) in space.blocks:
        if cls not in by_class:
            continue
        block = by_class[cls](f1, f2)
        out[space.block(cls, l)] = block.ravel()
    return out


def build_amc(config: SystemConfig) -> AmcModel:
    """Assemble ``A``, ``c_s``, ``c_u`` and ``v`` for ``config`` (``k >= 1``)."""
    if config.k < 1:
        raise ValueError(
            "the absorbing chain is defined for k >= 1 only; "
            "run the simulator for the k = 0 (zero-wait) baseline"
        )
    d1, d2 = config.dph1, config.dph2
    space = enumerate_amc(d1.order, d2.order, config.k)
    A = assemble(space, AMC_RULES, d1, d2, config.priority)

    def kron(a, b):
        return np.kron(a, b)

    c_u = _exit_vector(space, d1, d2, {
        2: lambda f1, f2: kron(f1["e"], f2["b"]),
        3: lambda f1, f2: kron(f1["b"], f2["e"]),
    })
    c_s = _exit_vector(space, d1, d2, {
        8: lambda f1, f2: kron(f1["b"], f2["e"]) + kron(f1["e"], f2["b"]) - kron(f1["b"], f2["b"]),
        11: lambda f1, f2: kron(f1["b"], f2["e"]),
        12: lambda f1, f2: kron(f1["e"], f2["b"]),
        13: lambda f1, f2: kron(f1["b"], f2["1"]),
        14: lambda f1, f2: kron(f1["1"], f2["b"]),
    })
    v = space.class_mask(NON_PSTAR_CLASSES).astype(float)
    for arr in (c_s, c_u, v):
        arr.setflags(write=False)
    return AmcModel(config, space, A, c_s, c_u, v)


def _sigma_support(model: AmcModel) -> np.ndarray:
    start_cls = 5 if model.config.priority is S1 else 6
    return np.array(
        [s.l == 0 and s.cls in (1, 4, start_cls) for s in model.space.states], dtype=bool
    )


def validate_amc(model: AmcModel, tol: float = 1e-12) -> list[str]:
    """Check the structural invariants of ``model``; returns one message per violation."""
    problems = []
    space = model.space
    A = model.A
    if A.nnz and A.data.min() < 0:
        bad = np.unique(A.tocoo().row[A.tocoo().data < 0])
        for r in bad:
            problems.append(f"negative entry in row of state {tuple(space.states[r])}")
    total = np.asarray(A.sum(axis=1)).ravel() + model.c_s + model.c_u
    for r in np.flatnonzero(np.abs(total - 1.0) > tol):
        problems.append(
            f"row-sum: state {tuple(space.states[r])} sums to {total[r]:.17g}, expected 1"
        )
    cls = np.array([s.cls for s in space.states])
    for r in np.flatnonzero((model.c_u != 0) & ~np.isin(cls, list(_CU_CLASSES))):
        problems.append(f"support: c_u mass {model.c_u[r]:g} on state {tuple(space.states[r])}")
    for r in np.flatnonzero((model.c_s != 0) & ~np.isin(cls, list(_CS_CLASSES))):
        problems.append(f"support: c_s mass {model.c_s[r]:g} on state {tuple(space.states[r])}")
    if np.any(model.c_s < -tol) or np.any(model.c_u < -tol):
        problems.append("negative absorption probability")
    expected_v = np.isin(cls, list(NON_PSTAR_CLASSES)).astype(float)
    for r in np.flatnonzero(model.v != expected_v):
        problems.append(f"indicator: v wrong on state {tuple(space.states[r])}")
    if model.sigma is not None:
        sigma = model.sigma
        if np.any(sigma < -tol):
            problems.append("sigma: negative entries")
        if abs(sigma.sum() - 1.0) > tol:
            problems.append(f"sigma: sums to {sigma.sum():.17g}, expected 1")
        legal = _sigma_support(model)
        for r in np.flatnonzero((sigma != 0) & ~legal):
            problems.append(f"sigma: mass {sigma[r]:g} outside legal support at {tuple(space.states[r])}")
    return problems
