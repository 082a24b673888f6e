"""In-flow R, q-flow P and the retained-flow sums S_n, exactly, to a depth."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np
from gmpy2 import mpq

from .network import NetworkState, delay_of_counter
from .rationals import ONE, ZERO, Rational
from .strings import value


@dataclass
class FlowTable:
    depth: int
    R: List[np.ndarray]
    S: List[Rational]
    P: List[np.ndarray] = field(default_factory=list)

    def r(self, sigma: str) -> Rational:
        return self.R[len(sigma)][value(sigma)]

    def p(self, sigma: str) -> Rational:
        return self.P[len(sigma)][value(sigma)]

    def level_r_sum(self, n: int) -> Rational:
        return _exact_sum(self.R[n])

    def level_p_sum(self, n: int) -> Rational:
        return _exact_sum(self.P[n])


def _exact_sum(arr: np.ndarray) -> Rational:
    return mpq(arr.sum()) if len(arr) else ZERO


def _child_fraction(k: int) -> Rational:
    # q(sigma, sigma b) = (1 - d) / 2 with d = 1/k
    return (ONE - delay_of_counter(k)) / 2


def _objects(values) -> np.ndarray:
    out = np.empty(len(values), dtype=object)
    out[:] = list(values)
    return out


def child_fractions(counters: np.ndarray) -> np.ndarray:
    uniq, inv = np.unique(counters, return_inverse=True)
    lut = _objects([_child_fraction(int(k)) for k in uniq])
    return lut[inv.reshape(-1)]


def inflow_table(state: NetworkState, depth: int | None = None) -> FlowTable:
    """R level by level, and S_n = (level R-sum) - (extra-edge inflow at level n)."""
    depth = state.depth if depth is None else depth
    if depth > state.depth:
        raise ValueError(f"table depth {depth} exceeds state depth {state.depth}")
    R = [_objects([ONE])]
    S = [ONE]
    for n in range(depth):
        child = R[n] * child_fractions(state.counters[n])
        nxt = np.repeat(child, 2)
        bypass = ZERO
        for e in state.edges_ending_at_level(n + 1):
            inflow = delay_of_counter(state.counter(e.start)) * R[len(e.start)][value(e.start)]
            nxt[value(e.end)] = nxt[value(e.end)] + inflow
            bypass += inflow
        R.append(nxt)
        S.append(_exact_sum(nxt) - bypass)
    return FlowTable(depth=depth, R=R, S=S)


def qflow_table(table: FlowTable) -> FlowTable:
    """Fill P by P(sigma) = max(R(sigma), P(sigma0) + P(sigma1)), P = R at the frontier.

    Equals the supremum of R over prefix-free extension sets inside the
    truncation; the harness cross-checks this against explicit enumeration.
    """
    N = table.depth
    P: List[np.ndarray] = [None] * (N + 1)
    P[N] = table.R[N].copy()
    for n in range(N - 1, -1, -1):
        below = P[n + 1][0::2] + P[n + 1][1::2]
        P[n] = np.maximum(table.R[n], below)
    table.P = P
    return table


def flow_table(state: NetworkState, depth: int | None = None) -> FlowTable:
    return qflow_table(inflow_table(state, depth))
