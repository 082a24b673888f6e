"""Finite-depth checks of the construction's lemmas, recomputed from raw state.

No check trusts engine bookkeeping: w, stage cases, fans and the reconstructed
elementary restrictions are derived again here from the delay counters and
the edge set.  Limit statements (stability, edge existence, absence of
atoms) only get their finite shadows.
"""
from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from gmpy2 import mpq

from .flow import FlowTable, flow_table
from .network import EdgeRecord, NetworkState, delay_of_counter
from .rationals import ONE, ZERO, Rational, format_rat, pow2
from .requirements import monotonize
from .strings import DUMMY, from_index, pair_threshold, string_index, task, value

MAX_WITNESSES = 25
BRUTE_FORCE_MAX_DEPTH = 5


@dataclass
class CheckReport:
    name: str
    scope: dict
    verdict: str  # "pass", "fail" or "exempt"
    witnesses: List[str] = field(default_factory=list)
    values: Dict[str, str] = field(default_factory=dict)
    notice: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict != "fail"

    def to_dict(self) -> dict:
        d = {"name": self.name, "scope": self.scope, "verdict": self.verdict,
             "witnesses": self.witnesses, "values": self.values}
        if self.notice:
            d["notice"] = self.notice
        return d


def _report(name, scope, witnesses, values=None, notice="") -> CheckReport:
    return CheckReport(name, scope, "fail" if witnesses else "pass",
                       witnesses[:MAX_WITNESSES], values or {}, notice)


def _enc(sigma: str) -> str:
    return sigma or "e"


# -- independent re-derivations ---------------------------------------------------

def recompute_w(edges: Sequence[EdgeRecord], i: int) -> int:
    """Scan n = 0, 1, ... for the first i-position past every higher-priority edge end."""
    n = 0
    while True:
        if task(n) == i and all(len(e.end) < n for e in edges if e.task < i):
            return n
        n += 1


def edges_before(state: NetworkState, n: int) -> List[EdgeRecord]:
    return [e for e in state.edges if e.stage_added < n]


def stage_case(state: NetworkState, n: int) -> str:
    """Case of stage n, from edges alone: 1, 2.1 or 2.2."""
    if recompute_w(edges_before(state, n), task(n)) == n:
        return "1"
    if any(len(e.end) == n for e in state.edges):
        return "2.1"
    return "2.2"


class Restriction:
    """The elementary restriction q_{n-1}: delays below level n, edges added before stage n."""

    def __init__(self, state: NetworkState, n: int):
        self.state, self.n = state, n
        self.edges = edges_before(state, n)
        self._starts = {e.start for e in self.edges}
        self.depth = state.depth

    def counter(self, sigma: str) -> int:
        return self.state.counter(sigma) if len(sigma) < self.n else 0

    def delay(self, sigma: str) -> Rational:
        return delay_of_counter(self.counter(sigma))

    def has_edge_start(self, sigma: str) -> bool:
        return sigma in self._starts


def naive_inflow(state: NetworkState, depth: int) -> Dict[str, Rational]:
    """R straight from its definition, over explicit strings."""
    R = {"": ONE}
    incoming: Dict[str, List[EdgeRecord]] = {}
    for e in state.edges:
        incoming.setdefault(e.end, []).append(e)
    for n in range(1, depth + 1):
        for idx in range(1 << n):
            tau = from_index(n, idx)
            parent = tau[:-1]
            total = (ONE - state.delay(parent)) / 2 * R[parent]
            for e in incoming.get(tau, ()):
                total += state.delay(e.start) * R[e.start]
            R[tau] = total
    return R


# -- brute-force q-flow oracle -----------------------------------------------------

def antichains(sigma: str, depth: int) -> Iterator[frozenset]:
    """Every non-empty prefix-free set of extensions of sigma of length <= depth."""
    def rec(node: str) -> List[frozenset]:
        # all prefix-free subsets of the subtree at node, including the empty set
        if len(node) == depth:
            return [frozenset(), frozenset([node])]
        left, right = rec(node + "0"), rec(node + "1")
        return [frozenset([node])] + [a | b for a in left for b in right]
    for d in rec(sigma):
        if d:
            yield d


def _cut_sums(R: Dict[str, int], node: str, depth: int) -> np.ndarray:
    """Sum of R over every maximal prefix-free set below node, one entry per set."""
    if len(node) == depth:
        return np.array([R[node]], dtype=object)
    left = _cut_sums(R, node + "0", depth)
    right = _cut_sums(R, node + "1", depth)
    return np.concatenate([np.array([R[node]], dtype=object), np.add.outer(left, right).ravel()])


def bruteforce_qflow(state: NetworkState, sigma: str, depth: int, R: Optional[Dict[str, Rational]] = None) -> Rational:
    """sup over prefix-free sets D of extensions of sigma (within depth) of sum R(D).

    R >= 0, so maximal prefix-free sets suffice; each is enumerated once and
    summed explicitly in integers over a common denominator.
    """
    if depth > BRUTE_FORCE_MAX_DEPTH:
        raise ValueError(f"brute force limited to depth {BRUTE_FORCE_MAX_DEPTH}")
    if len(sigma) > depth:
        raise ValueError("sigma deeper than the truncation")
    R = naive_inflow(state, depth) if R is None else R
    sub = {t: r for t, r in R.items() if t.startswith(sigma)}
    den = math.lcm(*(int(r.denominator) for r in sub.values()))
    scaled = {t: int(r * den) for t, r in sub.items()}
    best = max(_cut_sums(scaled, sigma, depth))
    return mpq(int(best), den)


def random_sparse_state(rng: random.Random, depth: int, p_delay=0.3, p_edge=0.5) -> NetworkState:
    """Arbitrary network (not a construction output) with unit-fraction delays and extra edges."""
    state = NetworkState.fresh(depth)
    for n in range(depth + 1):
        for idx in range(1 << n):
            if rng.random() < p_delay:
                state.set_node(n, idx, rng.choice([1, 2, 2, 3, 4, 5, 9]))
    for n in range(depth - 1):
        for idx in range(1 << n):
            if state.counters[n][idx] >= 2 and rng.random() < p_edge:
                m = rng.randint(n + 2, depth)
                lo = idx << (m - n)
                end = from_index(m, lo + rng.randrange(1 << (m - n)))
                sigma = from_index(n, idx)
                state.add_edge(EdgeRecord(sigma, end, task(n), 0, state.delay(sigma)))
    return state


# -- checks --------------------------------------------------------------------------

def check_semimeasure(table: FlowTable, scope=None) -> CheckReport:
    wit = []
    root = table.P[0][0]
    if root > ONE:
        wit.append(f"P(e) = {format_rat(root)} > 1")
    for n in range(table.depth):
        below = table.P[n + 1][0::2] + table.P[n + 1][1::2]
        for idx in np.flatnonzero(table.P[n] < below)[:MAX_WITNESSES]:
            wit.append(f"{_enc(from_index(n, int(idx)))}: P = {format_rat(table.P[n][idx])} "
                       f"< {format_rat(below[idx])}")
    return _report("semimeasure", scope or {"depth": table.depth}, wit, {"P_root": format_rat(root)})


def check_flow_laws(state: NetworkState, table: FlowTable, scope=None) -> CheckReport:
    """R(e) = 1, R >= 0, level R-sums <= 1, P >= R, and S_{n+1} = sum (1-d) R over level n."""
    wit = []
    if table.R[0][0] != ONE:
        wit.append("R(e) != 1")
    for n in range(table.depth + 1):
        if (table.R[n] < 0).any():
            wit.append(f"negative R on level {n}")
        if table.level_r_sum(n) > ONE:
            wit.append(f"level {n} R-sum exceeds 1")
        for idx in np.flatnonzero(table.P[n] < table.R[n])[:3]:
            wit.append(f"{_enc(from_index(n, int(idx)))}: P < R")
    for n in range(table.depth):
        uniq, inv = np.unique(state.counters[n], return_inverse=True)
        retained = np.array([ONE - delay_of_counter(int(k)) for k in uniq] + [None], dtype=object)[:-1]
        kept = mpq((table.R[n] * retained[inv.reshape(-1)]).sum())
        if kept != table.S[n + 1]:
            wit.append(f"S_{n + 1} = {format_rat(table.S[n + 1])} but retained flow is {format_rat(kept)}")
    return _report("flow_laws", scope or {"depth": table.depth}, wit)


def check_measure_bound(state: NetworkState, table: FlowTable, countdown, scope=None) -> CheckReport:
    scope = scope or {"depth": table.depth}
    if countdown.bound_exempt:
        return CheckReport("measure_bound", scope, "exempt",
                           notice=f"countdown {countdown.spec()} voids the measure bound; skipped")
    wit = []
    S = table.S
    for n in range(1, min(table.depth, state.stage + 1)):
        case = stage_case(state, n)
        if case == "1":
            ok = S[n + 1] >= S[n] - mpq(1, countdown(n))
        elif case == "2.1":
            ok = S[n + 1] >= S[n]
        else:
            ok = S[n + 1] == S[n]
        if not ok:
            wit.append(f"stage {n} (case {case}): S_{n} = {format_rat(S[n])}, S_{n + 1} = {format_rat(S[n + 1])}")
    loss = ZERO
    bounds = []
    for n in range(table.depth + 1):
        if n >= 1:
            loss += mpq(1, countdown(n))
        bound = ONE - loss
        bounds.append(bound)
        if S[n] < bound:
            wit.append(f"S_{n} = {format_rat(S[n])} < {format_rat(bound)}")
    values = {"S_final": format_rat(S[-1]), "bound_final": format_rat(bounds[-1]),
              "min_S": format_rat(min(S))}
    return _report("measure_bound", scope, wit, values)


def check_cutoff(state: NetworkState, table: FlowTable, scope=None) -> CheckReport:
    """P(tau) = 0 exactly when some normal step above tau carries no flow."""
    wit = []
    blocked = np.zeros(1, dtype=bool)
    n_blocked = 0
    for n in range(table.depth + 1):
        if n:
            blocked = np.repeat(blocked | (state.counters[n - 1] == 1), 2)
        zero = table.P[n] == 0
        n_blocked += int(blocked.sum())
        for idx in np.flatnonzero(zero & ~blocked)[:MAX_WITNESSES]:
            wit.append(f"{_enc(from_index(n, int(idx)))}: P = 0 but no blocked prefix")
        for idx in np.flatnonzero(blocked & ~zero)[:MAX_WITNESSES]:
            wit.append(f"{_enc(from_index(n, int(idx)))}: blocked prefix but P = {format_rat(table.P[n][idx])}")
    return _report("cutoff", scope or {"depth": table.depth}, wit, {"blocked_nodes": str(n_blocked)})


def nested_pairs(edges: Sequence[EdgeRecord]) -> List[Tuple[EdgeRecord, EdgeRecord]]:
    """Edge pairs (z, x), (s, t) with z < s < x and |x| <= |t|."""
    by_start: Dict[str, List[EdgeRecord]] = {}
    for e in edges:
        by_start.setdefault(e.start, []).append(e)
    bad = []
    for inner in edges:
        s = inner.start
        for k in range(len(s)):
            for outer in by_start.get(s[:k], ()):
                if outer.end.startswith(s) and len(outer.end) > len(s) and len(outer.end) <= len(inner.end):
                    bad.append((outer, inner))
    return bad


def check_structure(state: NetworkState, scope=None) -> CheckReport:
    wit = []
    for outer, inner in nested_pairs(state.edges):
        wit.append(f"nested edges ({_enc(outer.start)},{outer.end}) and ({_enc(inner.start)},{inner.end})")
    seen = set()
    for e in state.edges:
        if e.start in seen:
            wit.append(f"two edges start at {_enc(e.start)}")
        seen.add(e.start)
        if not (task(len(e.start)) == task(len(e.end)) == e.task):
            wit.append(f"edge ({_enc(e.start)},{e.end}) joins tasks {task(len(e.start))}/{task(len(e.end))}, labelled {e.task}")
        if e.flow_fraction != state.delay(e.start):
            wit.append(f"edge ({_enc(e.start)},{e.end}) carries {format_rat(e.flow_fraction)} != d(start)")
        if state.counter(e.end) != 0:
            wit.append(f"edge target {e.end} has delay {format_rat(state.delay(e.end))}")
        if e.stage_added != len(e.end):
            wit.append(f"edge ({_enc(e.start)},{e.end}) added at stage {e.stage_added}")
    for n, level in enumerate(state.counters):
        if (level < 0).any():
            wit.append(f"negative counter on level {n}")
    return _report("structure", {"edges": len(state.edges)}, wit)


def check_halving(state: NetworkState, table: FlowTable, scope=None) -> CheckReport:
    wit = []
    decay = []
    top = max(task(n) for n in range(table.depth + 1))
    for i in range(top + 1):
        w = recompute_w(state.edges, i)
        if w > table.depth:
            continue
        for e in state.edges:
            if len(e.start) < w <= len(e.end):
                wit.append(f"task {i}: edge ({_enc(e.start)},{e.end}) crosses level w = {w}")
        if w == 0:
            continue
        parent = table.P[w - 1]
        for b in (0, 1):
            child = table.P[w][b::2]
            for idx in np.flatnonzero(child * 2 > parent)[:MAX_WITNESSES]:
                wit.append(f"task {i}: P({from_index(w, 2 * int(idx) + b)}) > P({_enc(from_index(w - 1, int(idx)))})/2")
        decay.append((w, max(table.P[w])))
    decay.sort()
    values = {f"max_P_level_{w}": format_rat(p) for w, p in decay}
    return _report("halving", scope or {"depth": table.depth}, wit, values)


def check_events(state: NetworkState, countdown, scope=None) -> CheckReport:
    """Event log against the state: cases, Case-1 levels, fans, chains, deactivation."""
    wit = []
    stages = [ev.stage for ev in state.events]
    if stages != list(range(1, state.stage + 1)):
        wit.append(f"event stages {stages[:5]}... are not 1..{state.stage}")
    case_names = {"1": "INITIAL_ACTIVATION", "2.1": "EDGES_ADDED", "2.2": "NOOP"}
    for ev in state.events:
        n = ev.stage
        if n > state.depth:
            break
        case = stage_case(state, n)
        if ev.case != case_names[case]:
            wit.append(f"stage {n}: logged {ev.case}, state says case {case}")
        level = state.counters[n]
        if case == "1":
            if not (level == countdown(n)).all():
                wit.append(f"stage {n}: Case-1 level not uniformly 1/{countdown(n)}")
        elif case == "2.2":
            if level.any():
                wit.append(f"stage {n}: no-op stage left delays on level {n}")
        else:
            covered = np.zeros(len(level), dtype=bool)
            for e in state.edges:
                if len(e.end) != n:
                    continue
                m, lo = len(e.start), value(e.start) << (n - len(e.start))
                hi = (value(e.start) + 1) << (n - m)
                fan = np.arange(lo, hi) != value(e.end)
                expect = state.counter(e.start) - 1
                if not (level[lo:hi][fan] == expect).all():
                    wit.append(f"stage {n}: fan of ({_enc(e.start)},{e.end}) not at 1/{expect}")
                covered[lo:hi] = True
            if level[~covered].any():
                wit.append(f"stage {n}: delays outside every fan")
            top = max(task(k) for k in range(state.depth + 1))
            after = [e for e in state.edges if e.stage_added <= n]
            for k in range(task(n) + 1, top + 1):
                if recompute_w(after, k) <= n:
                    wit.append(f"stage {n}: task {k} not deactivated (w = {recompute_w(after, k)})")
    # chains of same-task edges along one path
    initial = {n for n in range(1, state.stage + 1) if n <= state.depth and stage_case(state, n) == "1"}
    starts = {e.start: e for e in state.edges}
    for b in state.edges:
        above = next((starts[b.start[:k]] for k in range(len(b.start) - 1, -1, -1)
                      if b.start[:k] in starts and starts[b.start[:k]].task == b.task), None)
        if above is not None and len(b.start) != len(above.end) and len(b.start) not in initial:
            wit.append(f"edge at {b.start} below edge ({_enc(above.start)},{above.end}) breaks the chain discipline")
    return _report("events", {"stages": state.stage}, wit)


def check_discard(state: NetworkState, scope=None) -> CheckReport:
    wit = []
    for e in state.edges:
        for k in range(1, len(e.end) + 1):
            if state.counter(e.end[:k]) == 1:
                wit.append(f"edge ({_enc(e.start)},{e.end}) attaches below discarded {e.end[:k]}")
                break
    return _report("discard", {"edges": len(state.edges)}, wit)


def check_continuations(state: NetworkState, B, scope=None) -> CheckReport:
    """Re-evaluate B on q_{n-1} for every fired edge; the target must be the least such."""
    wit = []
    cache: Dict[int, Restriction] = {}
    for e in state.edges:
        n = e.stage_added
        q = cache.setdefault(n, Restriction(state, n))
        if not (0 < q.counter(e.start) and q.counter(e.start) != 1):
            wit.append(f"edge ({_enc(e.start)},{e.end}): start not active at stage {n - 1}")
        if recompute_w(q.edges, task(n)) > len(e.start):
            wit.append(f"edge ({_enc(e.start)},{e.end}): start above w")
        if q.has_edge_start(e.start):
            wit.append(f"edge ({_enc(e.start)},{e.end}): start already carried an edge")
        if not B.holds(q, e.start, e.end):
            wit.append(f"edge ({_enc(e.start)},{e.end}): B fails on the reconstructed restriction")
            continue
        m = len(e.start)
        lo = value(e.start) << (n - m)
        for idx in range(lo, value(e.end)):
            tau = from_index(n, idx)
            if B.holds(q, e.start, tau):
                wit.append(f"edge ({_enc(e.start)},{e.end}): lexicographically smaller target {tau}")
                break
    return _report("continuations", {"edges": len(state.edges)}, wit)


def check_ledger(state: NetworkState, B, scope=None) -> CheckReport:
    """Recompute every test entry from the edges; masses must stay below 2^-s."""
    ledger = state.ledger
    mode = getattr(B, "mode", "always")
    if mode not in ("mlr", "frand"):
        n = sum(len(v) for v in ledger.entries.values()) if ledger else 0
        return _report("ledger", {"mode": mode}, [f"{n} ledger entries in a run without tests"] if n else [])
    wit = []
    recomputed: Dict[int, List[Tuple[str, Rational, str]]] = {}
    starts = set()
    for e in state.edges:
        req = B.requirement(e.task)
        if req == DUMMY:
            wit.append(f"edge ({_enc(e.start)},{e.end}) fired for the dummy task")
            continue
        j, s = req[0], req[1]
        thr = pair_threshold(string_index(e.start), s)
        n = len(e.end)
        eta = B.catalog.eval(j, e.end, n)
        if mode == "mlr":
            if not len(eta) > thr:
                wit.append(f"edge ({_enc(e.start)},{e.end}): |eta| = {len(eta)} <= threshold {thr}")
            if pow2(-len(eta)) > pow2(-thr):
                wit.append(f"entry {eta}: 2^-|eta| exceeds 2^-{thr}")
            weight = pow2(-thr)
        else:
            e_idx = req[2]
            vals = {}
            for k in range(len(eta) + 1):
                v = B.partials.eval(e_idx, eta[:k], n)
                if v is not None:
                    vals[eta[:k]] = v
            star = monotonize(vals) if vals else {}
            fs = star.get(eta)
            if fs is None:
                fs = max(star.values()) if star else None
            if fs is None or fs <= thr:
                wit.append(f"edge ({_enc(e.start)},{e.end}): f*(eta) = {fs} not above {thr}")
                continue
            weight = pow2(-fs)
        if e.start in starts:
            wit.append(f"start {_enc(e.start)} contributes twice")
        starts.add(e.start)
        recomputed.setdefault(s, []).append((eta, weight, e.start))
    stored = {s: sorted((x.eta, x.weight, x.start) for x in v) for s, v in (ledger.entries if ledger else {}).items()}
    if {s: sorted(v) for s, v in recomputed.items()} != stored:
        wit.append("stored ledger differs from the recomputation")
    values = {}
    for s, items in sorted(recomputed.items()):
        mass = sum((w for _, w, _ in items), ZERO)
        values[f"mass_s{s}"] = format_rat(mass)
        if mass > pow2(-s):
            wit.append(f"s = {s}: mass {format_rat(mass)} > 2^-{s}")
    return _report("ledger", {"mode": mode, "entries": str(sum(len(v) for v in recomputed.values()))}, wit, values)


def check_qflow_oracle(state: NetworkState, table: FlowTable, depth: Optional[int] = None) -> CheckReport:
    """Max-recursion P against the brute-force supremum, at every node to a small depth."""
    depth = min(table.depth, BRUTE_FORCE_MAX_DEPTH) if depth is None else depth
    sub = qflow_for_depth(state, depth)
    R = naive_inflow(state, depth)
    wit = []
    for n in range(depth + 1):
        for idx in range(1 << n):
            sigma = from_index(n, idx)
            if R[sigma] != sub.R[n][idx]:
                wit.append(f"{_enc(sigma)}: R differs from its definition")
            bf = bruteforce_qflow(state, sigma, depth, R)
            if bf != sub.P[n][idx]:
                wit.append(f"{_enc(sigma)}: recursion {format_rat(sub.P[n][idx])} != brute force {format_rat(bf)}")
    return _report("qflow_oracle", {"depth": depth}, wit)


def qflow_for_depth(state: NetworkState, depth: int) -> FlowTable:
    return flow_table(state, depth)


# -- diagnostics ---------------------------------------------------------------------

def task_progress(state: NetworkState, B=None) -> List[dict]:
    """Per-task finite-depth progress; a diagnostic, not a proof of the limit lemmas."""
    out = []
    top = max(task(n) for n in range(state.depth + 1))
    mode = getattr(B, "mode", "always")
    for i in range(top + 1):
        w = recompute_w(state.edges, i)
        mine = [e for e in state.edges if e.task == i]
        current = [e for e in mine if len(e.start) >= w]
        levels = [m for m in range(w, min(state.stage, state.depth) + 1) if task(m) == i]
        active = sum(int(((state.counters[m] >= 2)).sum()) for m in levels)
        with_edge = sum(1 for e in current)
        discarded = sum(int((state.counters[m] == 1).sum()) for m in levels)
        entry = {
            "task": i,
            "requirement": list(B.requirement(i)) if B is not None and B.requirement(i) != DUMMY else DUMMY,
            "w": w,
            "edges_fired": len(mine),
            "fired_stages": sorted({e.stage_added for e in mine}),
            "counters_outstanding": active - with_edge,
            "discarded_nodes": discarded,
            "label": "diagnostic, not a proof of the limit lemma",
        }
        if i == 0 or (mode in ("mlr", "frand") and B.requirement(i) == DUMMY):
            entry["status"] = "inert"
        elif current:
            entry["status"] = "fired"
        elif w > state.stage:
            entry["status"] = "pending, not yet activated"
        elif active == 0 and discarded:
            entry["status"] = "discarded"
        elif mode in ("mlr", "frand"):
            entry["status"] = "pending, (c) never satisfied"
        else:
            entry["status"] = "pending"
        out.append(entry)
    return out


# -- aggregate -----------------------------------------------------------------------

def verify(state: NetworkState, config, table: Optional[FlowTable] = None, workers: int = 4) -> Tuple[bool, List[CheckReport]]:
    """Every check on one run.  Passing means no non-exempt check failed."""
    table = table if table is not None else flow_table(state, min(state.depth, state.stage))
    B = config.make_predicate()
    countdown = config.make_countdown()
    scope = {"mode": config.mode, "depth": table.depth, "countdown": countdown.spec()}
    jobs = [
        lambda: check_semimeasure(table, scope),
        lambda: check_flow_laws(state, table, scope),
        lambda: check_measure_bound(state, table, countdown, scope),
        lambda: check_cutoff(state, table, scope),
        lambda: check_structure(state, scope),
        lambda: check_halving(state, table, scope),
        lambda: check_events(state, countdown, scope),
        lambda: check_discard(state, scope),
        lambda: check_continuations(state, B, scope),
        lambda: check_ledger(state, B, scope),
    ]
    # checks only read the state; merge order is by name, not completion
    with ThreadPoolExecutor(max_workers=workers) as pool:
        reports = list(pool.map(lambda job: job(), jobs))
    reports.sort(key=lambda r: r.name)
    return all(r.ok for r in reports), reports
