"""Canonical enumeration of the absorbing (AMC) and recurrent (RMC) chain states.

Every transient state is a tuple ``(cls, i, j, l)``: ``i``/``j`` are the service
phases of server 1/2 (0 when idle) and ``l`` is the freezing clock.  States are
ordered class-major, then by clock, then ``i``, then ``j``.  The AMC class 8
has no clock and always stores ``l = 0``.

AMC classes (``P*`` is the tagged packet whose generation starts the chain):

==== ==========================================  =========
cls  meaning                                     servers
==== ==========================================  =========
1    P* on S1, S2 holds an older packet          busy/busy
2    P* on S1, S2 holds a newer packet           busy/busy
3    P* on S2, S1 holds a newer packet           busy/busy
4    P* on S2, S1 holds an older packet          busy/busy
5    P* on S1, S2 idle                           busy/idle
6    P* on S2, S1 idle                           idle/busy
7    P* received, both idle                      idle/idle
8    P* received, both packets up to date        busy/busy (no clock)
9    P* received, S1 packet obsolete, S2 idle    busy/idle
10   P* received, S2 packet obsolete, S1 idle    idle/busy
11   S1 packet up to date, S2 packet obsolete    busy/busy
12   S2 packet up to date, S1 packet obsolete    busy/busy
13   S1 packet up to date, S2 idle               busy/idle
14   S2 packet up to date, S1 idle               idle/busy
==== ==========================================  =========

RMC classes: 1 both idle, 2 only S1 busy, 3 only S2 busy, 4 both busy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "State",
    "StateSpace",
    "AMC_OCCUPANCY",
    "RMC_OCCUPANCY",
    "AMC_RELABEL",
    "enumerate_amc",
    "enumerate_rmc",
    "amc_size",
    "rmc_size",
    "index_of",
    "state_of",
]


class State(NamedTuple):
    cls: int
    i: int
    j: int
    l: int


# (server 1 busy, server 2 busy, carries clock)
AMC_OCCUPANCY = {
    1: (True, True, True),
    2: (True, True, True),
    3: (True, True, True),
    4: (True, True, True),
    5: (True, False, True),
    6: (False, True, True),
    7: (False, False, True),
    8: (True, True, False),
    9: (True, False, True),
    10: (False, True, True),
    11: (True, True, True),
    12: (True, True, True),
    13: (True, False, True),
    14: (False, True, True),
}

RMC_OCCUPANCY = {
    1: (False, False, True),
    2: (True, False, True),
    3: (False, True, True),
    4: (True, True, True),
}

# server-swap relabelling of AMC classes
AMC_RELABEL = {1: 4, 2: 3, 3: 2, 4: 1, 5: 6, 6: 5, 7: 7, 8: 8, 9: 10, 10: 9, 11: 12, 12: 11, 13: 14, 14: 13}


def amc_size(n1: int, n2: int, k: int) -> int:
    """Number of transient AMC states, ``k(6 N1 N2 + 3(N1 + N2) + 1) + N1 N2``."""
    return k * (6 * n1 * n2 + 3 * (n1 + n2) + 1) + n1 * n2


def rmc_size(n1: int, n2: int, k: int) -> int:
    return k * (n1 * n2 + n1 + n2 + 1)


@dataclass(frozen=True)
class StateSpace:
    """Ordered, indexed state set for one ``(N1, N2, k)`` and chain kind."""

    kind: str
    n1: int
    n2: int
    k: int
    states: tuple = field(repr=False)
    # first index of each (cls, l) block and the block's phase dimensions
    blocks: dict = field(repr=False)
    _index: dict = field(repr=False, compare=False)

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def index_of(self, state) -> int:
        return index_of(self, state)

    def state_of(self, index: int) -> State:
        return state_of(self, index)

    def block(self, cls: int, l: int = 0) -> slice:
        """Index range of the ``(cls, l)`` block."""
        start, d1, d2 = self.blocks[(cls, l)]
        return slice(start, start + d1 * d2)

    def block_dims(self, cls: int) -> tuple[int, int]:
        occupancy = (AMC_OCCUPANCY if self.kind == "AMC" else RMC_OCCUPANCY)[cls]
        return (self.n1 if occupancy[0] else 1, self.n2 if occupancy[1] else 1)

    def class_mask(self, classes) -> np.ndarray:
        classes = set(classes)
        return np.array([s.cls in classes for s in self.states], dtype=bool)


def _build(kind: str, n1: int, n2: int, k: int) -> StateSpace:
    for name, value in (("N1", n1), ("N2", n2)):
        if int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value}")
    if int(k) != k or k < 1:
        raise ValueError(
            f"freezing parameter k={k} is outside the chain's domain (k >= 1); "
            "use the simulator for the k = 0 zero-wait system"
        )
    occupancy = AMC_OCCUPANCY if kind == "AMC" else RMC_OCCUPANCY
    states = []
    blocks = {}
    for cls, (busy1, busy2, clocked) in occupancy.items():
        phases1 = range(1, n1 + 1) if busy1 else (0,)
        phases2 = range(1, n2 + 1) if busy2 else (0,)
        for l in range(k if clocked else 1):
            blocks[(cls, l)] = (len(states), len(phases1), len(phases2))
            for i in phases1:
                for j in phases2:
                    states.append(State(cls, i, j, l))
    states = tuple(states)
    return StateSpace(kind, n1, n2, k, states, blocks, {s: idx for idx, s in enumerate(states)})


def enumerate_amc(n1: int, n2: int, k: int) -> StateSpace:
    """Transient states of the absorbing chain; the two absorbing states are not listed."""
    return _build("AMC", n1, n2, k)


def enumerate_rmc(n1: int, n2: int, k: int) -> StateSpace:
    return _build("RMC", n1, n2, k)


def _check_state(space: StateSpace, state: State) -> None:
    occupancy = AMC_OCCUPANCY if space.kind == "AMC" else RMC_OCCUPANCY
    if state.cls not in occupancy:
        raise ValueError(f"unknown {space.kind} class {state.cls}")
    busy1, busy2, clocked = occupancy[state.cls]
    ok_i = 1 <= state.i <= space.n1 if busy1 else state.i == 0
    ok_j = 1 <= state.j <= space.n2 if busy2 else state.j == 0
    ok_l = 0 <= state.l < space.k if clocked else state.l == 0
    if not (ok_i and ok_j and ok_l):
        raise ValueError(f"{tuple(state)} violates the invariants of {space.kind} class {state.cls}")


def index_of(space: StateSpace, state) -> int:
    state = State(*state)
    try:
        return space._index[state]
    except KeyError:
        _check_state(space, state)
        raise


def state_of(space: StateSpace, index: int) -> State:
    if int(index) != index or not 0 <= index < len(space.states):
        raise IndexError(f"state index {index} out of range [0, {len(space.states)})")
    return space.states[int(index)]
