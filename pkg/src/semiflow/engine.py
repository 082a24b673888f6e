"""Stage-by-stage construction of the network (the template's Cases 1, 2.1, 2.2)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from gmpy2 import mpq

from .flow import FlowTable, flow_table
from .network import EdgeRecord, InvariantError, NetworkState, delay_of_counter
from .rationals import Rational, as_rat, format_rat
from .requirements import (
    DEFAULT_FUNCTIONALS,
    DEFAULT_PARTIALS,
    AlwaysB,
    FRandB,
    MLRB,
    TestLedger,
    build_catalog,
    build_partials,
)
from .strings import extension_range, from_index, next_task_position, task, value

log = logging.getLogger(__name__)

INITIAL_ACTIVATION = "INITIAL_ACTIVATION"
EDGES_ADDED = "EDGES_ADDED"
NOOP = "NOOP"

MODES = ("always", "mlr", "frand")
MAX_DEPTH = 24


class ConfigError(ValueError):
    pass


# -- countdown ---------------------------------------------------------------

@dataclass(frozen=True)
class Countdown:
    """Initial counter values: (n + n0)**2, or a constant override."""

    n0: int = 0
    constant: Optional[int] = None

    def __call__(self, n: int) -> int:
        return self.constant if self.constant is not None else (n + self.n0) ** 2

    @property
    def bound_exempt(self) -> bool:
        return self.constant is not None

    def spec(self) -> str:
        return "default" if self.constant is None else f"constant:{self.constant}"


def inverse_square_tail_below(n0: int, delta: Rational, max_terms: int = 4096) -> Optional[bool]:
    """Decide sum_{n>=1} (n+n0)**-2 < delta exactly.

    Partial sums up to K plus the tail bound sum_{k>K} k**-2 <= 1/K.
    Returns None if undecided within ``max_terms`` terms.
    """
    partial = mpq(0)
    k = n0
    checkpoint = 16
    while k - n0 < max_terms:
        k += 1
        partial += mpq(1, k * k)
        if partial >= delta:
            return False
        if k - n0 >= checkpoint:
            if partial + mpq(1, k) < delta:
                return True
            checkpoint *= 2
    return None


def derive_n0(delta: Rational, limit: int = 1 << 16) -> int:
    """Least n0 whose inverse-square tail is certified below delta."""
    delta = as_rat(delta)
    if not 0 < delta < 1:
        raise ConfigError(f"delta must lie in (0,1), got {format_rat(delta)}")
    # the tail is about 1/n0, so nothing below 1/delta - 2 can work
    n0 = max(0, int(1 / delta) - 2)
    while n0 < limit:
        if inverse_square_tail_below(n0, delta):
            return n0
        n0 += 1
    raise ConfigError(f"could not certify n0 for delta={format_rat(delta)}")


# -- configuration -------------------------------------------------------------

@dataclass
class RunConfig:
    depth: int = 20
    delta: Rational = field(default_factory=lambda: mpq(1, 2))
    n0: Optional[int] = None
    mode: str = "mlr"
    catalog: Tuple[str, ...] = DEFAULT_FUNCTIONALS
    partials: Tuple[str, ...] = DEFAULT_PARTIALS
    countdown: str = "default"
    seed: int = 0

    def __post_init__(self):
        self.delta = as_rat(self.delta)
        self.catalog = tuple(self.catalog)
        self.partials = tuple(self.partials)

    def validate(self) -> "RunConfig":
        if not isinstance(self.depth, int) or not 2 <= self.depth <= MAX_DEPTH:
            raise ConfigError(f"depth must be an integer in [2, {MAX_DEPTH}], got {self.depth!r}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0,1), got {format_rat(self.delta)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.countdown == "default" or self.countdown.startswith("constant:")):
            raise ConfigError(f"countdown must be 'default' or 'constant:k', got {self.countdown!r}")
        if self.countdown.startswith("constant:"):
            try:
                k = int(self.countdown.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad countdown {self.countdown!r}") from None
            if k < 2:
                raise ConfigError("a constant countdown must be at least 2")
        if self.n0 is not None:
            if self.n0 < 0 or not inverse_square_tail_below(self.n0, self.delta):
                raise ConfigError(f"n0={self.n0} is not certified for delta={format_rat(self.delta)}")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit natural number")
        try:
            build_catalog(self.catalog)
            build_partials(self.partials)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def resolved_n0(self) -> int:
        return self.n0 if self.n0 is not None else derive_n0(self.delta)

    def make_countdown(self) -> Countdown:
        if self.countdown.startswith("constant:"):
            return Countdown(n0=self.resolved_n0(), constant=int(self.countdown.split(":", 1)[1]))
        return Countdown(n0=self.resolved_n0())

    def make_predicate(self):
        if self.mode == "always":
            return AlwaysB()
        if self.mode == "mlr":
            return MLRB(build_catalog(self.catalog))
        return FRandB(build_catalog(self.catalog), build_partials(self.partials))

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "delta": format_rat(self.delta),
            "n0": self.n0,
            "mode": self.mode,
            "catalog": list(self.catalog),
            "partials": list(self.partials),
            "countdown": self.countdown,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"depth", "delta", "n0", "mode", "catalog", "partials", "countdown", "seed", "outputs"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: v for k, v in d.items() if k in known and k != "outputs"}
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


# -- stage events ----------------------------------------------------------------

@dataclass(frozen=True)
class StageEvent:
    stage: int
    case: str
    task: int
    w_value: int
    candidates: Tuple[str, ...] = ()
    edges: Tuple[EdgeRecord, ...] = ()
    injured_tasks: Tuple[int, ...] = ()
    activation_delay: Optional[Rational] = None


# -- w, beta, candidates -------------------------------------------------------------

def max_task_at_depth(depth: int) -> int:
    return max(task(n) for n in range(depth + 1))


def w_value(state: NetworkState, i: int) -> int:
    """Least n with task(n) = i lying beyond the end of every edge of a task j < i."""
    last = max((len(e.end) for e in state.edges if e.task < i), default=-1)
    return next_task_position(i, last)


def open_mask(state: NetworkState, n: int) -> np.ndarray:
    """Condition (b) for every length-n string: no prefix of length 1..n has delay 1."""
    bad = np.zeros(1, dtype=bool)
    for m in range(1, n + 1):
        bad = np.repeat(bad, 2)
        if m <= state.depth:
            bad |= state.counters[m] == 1
    return ~bad


def beta(state: NetworkState, sigma: str, n: int, B, mask: Optional[np.ndarray] = None) -> Optional[str]:
    """Lexicographically least tau of length n below sigma with B(q, sigma, tau)."""
    if task(len(sigma)) != task(n):
        raise ValueError(f"beta needs task(|sigma|) = task(n); got {task(len(sigma))} and {task(n)}")
    if n <= len(sigma) or not B.may_fire(sigma, n):
        return None
    if mask is None:
        mask = open_mask(state, n)
    lo, hi = extension_range(len(sigma), value(sigma), n)
    for idx in np.flatnonzero(mask[lo:hi]):
        tau = from_index(n, lo + int(idx))
        if B.condition(sigma, tau):
            return tau
    return None


def candidate_targets(state: NetworkState, n: int, B, mask: Optional[np.ndarray] = None) -> Dict[str, str]:
    """C_n with the beta target of each member, in length-lexicographic order."""
    i = task(n)
    w = w_value(state, i)
    if w >= n:
        raise ValueError(f"candidates need w < n (w={w}, n={n})")
    if mask is None:
        mask = open_mask(state, n)
    out: Dict[str, str] = {}
    for m in range(w, n):
        if task(m) != i:
            continue
        active = np.flatnonzero(state.counters[m] >= 2)
        for idx in active:
            sigma = from_index(m, int(idx))
            if state.has_edge_start(sigma):
                continue
            tau = beta(state, sigma, n, B, mask)
            if tau is not None:
                out[sigma] = tau
    _assert_antichain(out)
    return out


def candidates(state: NetworkState, n: int, B) -> List[str]:
    return list(candidate_targets(state, n, B))


def _assert_antichain(nodes) -> None:
    seen = set(nodes)
    for sigma in seen:
        for k in range(len(sigma)):
            if sigma[:k] in seen:
                raise InvariantError(f"candidates {sigma[:k]!r} and {sigma!r} are comparable")


# -- the stage -----------------------------------------------------------------------

def step(state: NetworkState, n: int, B, countdown: Countdown) -> StageEvent:
    if n != state.stage + 1:
        raise InvariantError(f"stage {n} after stage {state.stage}")
    if n > state.depth:
        state.extend(n)
    i = task(n)
    w = w_value(state, i)
    if w > n:
        raise InvariantError(f"w({i}) = {w} beyond stage {n}")

    if w == n:
        k = countdown(n)
        state.set_level(n, k)
        event = StageEvent(n, INITIAL_ACTIVATION, i, w, activation_delay=delay_of_counter(k))
    else:
        targets = candidate_targets(state, n, B)
        if not targets:
            event = StageEvent(n, NOOP, i, w)
        else:
            horizon = max_task_at_depth(state.depth)
            w_before = {k: w_value(state, k) for k in range(i + 1, horizon + 1)}
            new_edges = []
            for sigma, tau in targets.items():
                k_sigma = state.counter(sigma)
                if k_sigma < 2:
                    raise InvariantError(f"candidate {sigma!r} has counter {k_sigma}")
                lo, hi = extension_range(len(sigma), value(sigma), n)
                # d/(1-d) maps 1/k to 1/(k-1)
                state.set_range(n, lo, hi, k_sigma - 1)
                state.set_node(n, value(tau), 0)
                new_edges.append(EdgeRecord(sigma, tau, i, n, delay_of_counter(k_sigma)))
            for e in new_edges:
                state.add_edge(e)
                if state.ledger is not None and hasattr(B, "ledger_entry"):
                    entry = B.ledger_entry(e)
                    if entry is not None:
                        state.ledger.add(*entry)
            injured = tuple(k for k, wb in w_before.items() if w_value(state, k) != wb)
            event = StageEvent(n, EDGES_ADDED, i, w, tuple(targets), tuple(new_edges), injured)
    state.events.append(event)
    state.stage = n
    return event


# -- runs --------------------------------------------------------------------------

@dataclass
class RunResult:
    config: RunConfig
    state: NetworkState
    table: FlowTable
    ledger: TestLedger
    report: dict


def new_state(config: RunConfig) -> NetworkState:
    state = NetworkState.fresh(config.depth)
    state.ledger = TestLedger(config.mode)
    return state


def advance(state: NetworkState, config: RunConfig, until: int) -> NetworkState:
    """Run stages state.stage + 1 .. until in order."""
    B = config.make_predicate()
    countdown = config.make_countdown()
    if until > state.depth:
        state.extend(until)
    for n in range(state.stage + 1, until + 1):
        ev = step(state, n, B, countdown)
        log.debug("stage %d: %s task=%d w=%d edges=%d", n, ev.case, ev.task, ev.w_value, len(ev.edges))
    return state


def summarize(config: RunConfig, state: NetworkState, table: FlowTable) -> dict:
    countdown = config.make_countdown()
    cases = {INITIAL_ACTIVATION: 0, EDGES_ADDED: 0, NOOP: 0}
    for ev in state.events:
        cases[ev.case] += 1
    return {
        "config": config.to_dict(),
        "n0": countdown.n0,
        "countdown": countdown.spec(),
        "bound_exempt": countdown.bound_exempt,
        "stages": state.stage,
        "cases": cases,
        "edges": len(state.edges),
        "S_final": format_rat(table.S[-1]),
        "P_root": format_rat(table.P[0][0]),
    }


def run(config: RunConfig, table_depth: Optional[int] = None) -> RunResult:
    config.validate()
    state = advance(new_state(config), config, config.depth)
    table = flow_table(state, table_depth if table_depth is not None else config.depth)
    return RunResult(config, state, table, state.ledger, summarize(config, state, table))


def resume(state: NetworkState, config: RunConfig, depth: Optional[int] = None) -> RunResult:
    config.validate()
    target = config.depth if depth is None else depth
    if target < state.stage:
        raise ConfigError(f"snapshot is already at stage {state.stage} > {target}")
    advance(state, config, target)
    table = flow_table(state, target)
    return RunResult(config, state, table, state.ledger, summarize(config, state, table))
