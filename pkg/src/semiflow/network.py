"""The 2^{<omega}-digraph with its network: delays, extra edges and q.

Delays produced by the construction are always 0, 1 or 1/k, so each level
stores an integer *counter* array: counter 0 means delay 0, counter k >= 1
means delay 1/k.  The flow from a node splits as (1 - d)/2 into each child
and d into the extra edge leaving it, if any.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np
from gmpy2 import mpq

from .rationals import HALF, ONE, ZERO, Rational
from .strings import from_index, is_strict_prefix, value


class InvariantError(RuntimeError):
    """An internal invariant of the construction was violated; the run halts."""


@dataclass(frozen=True)
class EdgeRecord:
    start: str
    end: str
    task: int
    stage_added: int
    flow_fraction: Rational

    def __post_init__(self):
        if not is_strict_prefix(self.start, self.end) or len(self.end) - len(self.start) < 2:
            raise InvariantError(f"not an extra edge: ({self.start!r}, {self.end!r})")


def delay_of_counter(k: int) -> Rational:
    return ZERO if k == 0 else mpq(1, int(k))


def counter_of_delay(d: Rational) -> int:
    d = mpq(d)
    if d == 0:
        return 0
    if d.numerator != 1:
        raise InvariantError(f"delay {d} is not 0 or a unit fraction")
    return int(d.denominator)


@dataclass
class NetworkState:
    """Mutable construction state: delay counters, extra edges, stage, logs.

    ``counters[n]`` is a dense int64 array over the 2**n strings of length n.
    ``level_default[n]`` is the uniform counter Case 1 put on level n (0 if
    none); entries differing from it are the fan/target exceptions.
    """

    depth: int
    counters: List[np.ndarray] = field(default_factory=list)
    level_default: List[int] = field(default_factory=list)
    edges: List[EdgeRecord] = field(default_factory=list)
    stage: int = 0
    events: list = field(default_factory=list)
    ledger: object = None
    _by_start: Dict[str, EdgeRecord] = field(default_factory=dict, repr=False)
    _by_end_level: Dict[int, List[EdgeRecord]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.counters:
            self.counters = [np.zeros(1 << n, dtype=np.int64) for n in range(self.depth + 1)]
            self.level_default = [0] * (self.depth + 1)
        edges, self.edges = list(self.edges), []
        self._by_start, self._by_end_level = {}, {}
        for e in edges:
            self.add_edge(e)

    @classmethod
    def fresh(cls, depth: int) -> "NetworkState":
        return cls(depth=depth)

    def extend(self, depth: int) -> None:
        """Grow the truncation depth; new levels carry no delay."""
        for n in range(self.depth + 1, depth + 1):
            self.counters.append(np.zeros(1 << n, dtype=np.int64))
            self.level_default.append(0)
        self.depth = max(self.depth, depth)

    # -- delays -----------------------------------------------------------
    def counter(self, sigma: str) -> int:
        n = len(sigma)
        if n > self.depth:
            return 0
        return int(self.counters[n][value(sigma)])

    def delay(self, sigma: str) -> Rational:
        return delay_of_counter(self.counter(sigma))

    def set_level(self, n: int, k: int) -> None:
        self.counters[n][:] = k
        self.level_default[n] = k

    def set_range(self, n: int, lo: int, hi: int, k: int) -> None:
        self.counters[n][lo:hi] = k

    def set_node(self, n: int, idx: int, k: int) -> None:
        self.counters[n][idx] = k

    # -- edges ------------------------------------------------------------
    def add_edge(self, edge: EdgeRecord) -> None:
        if edge.start in self._by_start:
            raise InvariantError(f"second extra edge at {edge.start!r}")
        self.edges.append(edge)
        self._by_start[edge.start] = edge
        self._by_end_level.setdefault(len(edge.end), []).append(edge)

    def edge_from(self, sigma: str) -> Optional[EdgeRecord]:
        return self._by_start.get(sigma)

    def edges_ending_at_level(self, n: int) -> List[EdgeRecord]:
        return self._by_end_level.get(n, [])

    def has_edge_start(self, sigma: str) -> bool:
        return sigma in self._by_start

    def copy(self) -> "NetworkState":
        return NetworkState(
            depth=self.depth,
            counters=[c.copy() for c in self.counters],
            level_default=list(self.level_default),
            edges=list(self.edges),
            stage=self.stage,
            events=list(self.events),
            ledger=self.ledger.copy() if self.ledger is not None else None,
        )


def q_value(state: NetworkState, sigma: str, tau: str) -> Rational:
    if len(tau) == len(sigma) + 1 and tau.startswith(sigma):
        return HALF * (ONE - state.delay(sigma))
    e = state.edge_from(sigma)
    if e is not None and e.end == tau:
        return state.delay(sigma)
    return ZERO


def support_blocked(state: NetworkState, sigma: str) -> bool:
    """Some normal step on the way to sigma carries q = 0 (a prefix has delay 1)."""
    return any(state.counter(sigma[:k]) == 1 for k in range(len(sigma)))


def blocked_masks(state: NetworkState, depth: int) -> List[np.ndarray]:
    """Per level, which nodes sit below a delay-1 proper prefix."""
    masks = [np.zeros(1, dtype=bool)]
    for n in range(1, depth + 1):
        parent = masks[-1] | (state.counters[n - 1] == 1)
        masks.append(np.repeat(parent, 2))
    return masks


def crossing_edges(state: NetworkState, level: int) -> List[EdgeRecord]:
    return [e for e in state.edges if len(e.start) < level <= len(e.end)]


def iter_nodes(depth: int) -> Iterable[str]:
    for n in range(depth + 1):
        for idx in range(1 << n):
            yield from_index(n, idx)
