"""Pluggable edge predicates B, the functional catalogs they consult, and test ledgers.

Three predicates ship:

* ``AlwaysB`` -- conditions (a) and (b) only; exercises the template.
* ``MLRB`` -- adds (c): the j-th functional's stage-|tau| output on tau is
  longer than ``pair_threshold(#sigma, s)``.  Fired outputs form a
  Martin-Loef test component U_s.
* ``FRandB`` -- adds (c*): some prefix of that output has a converged
  partial-function value above the threshold.  Fired outputs form an
  f-test component weighted by the monotonized function.

Catalog entries are stage-bounded and monotone in both the input string
and the step budget.  ``bound(steps)`` is an optional sound upper bound
on output length (or on function value, for partial entries) used to skip
hopeless target scans; it never changes which edge is chosen.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .rationals import ZERO, Rational, pow2
from .strings import DUMMY, pair_threshold, requirement_of_task, string_index, task

Functional = Callable[[str, int], str]
PartialFn = Callable[[str, int], Optional[int]]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    fn: Callable
    bound: Optional[Callable[[int], int]] = None


# -- monotone functionals --------------------------------------------------

def identity(sigma: str, steps: int) -> str:
    return sigma[:steps]


def zeros(sigma: str, steps: int) -> str:
    # one output bit per step, independent of the input
    return "0" * steps


def even_bits(sigma: str, steps: int) -> str:
    return sigma[:steps][0::2]


def copy_with_delay(k: int) -> Functional:
    def fn(sigma: str, steps: int) -> str:
        return sigma[: max(0, min(len(sigma), steps) - k)]
    return fn


def diverge_after(k: int) -> Functional:
    def fn(sigma: str, steps: int) -> str:
        return sigma[: min(len(sigma), steps, k)]
    return fn


class FunctionalCatalog:
    """Indexed family of stage-bounded monotone string functionals."""

    def __init__(self, entries: Iterable[CatalogEntry] = ()):
        self.entries: List[CatalogEntry] = list(entries)

    def register(self, name: str, fn: Functional, bound: Optional[Callable[[int], int]] = None) -> int:
        self.entries.append(CatalogEntry(name, fn, bound))
        return len(self.entries) - 1

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> List[str]:
        return [e.name for e in self.entries]

    def eval(self, j: int, sigma: str, steps: int) -> str:
        # indices past the catalog behave as a functional that never outputs
        if j >= len(self.entries):
            return ""
        return self.entries[j].fn(sigma, steps)

    def bound(self, j: int, steps: int) -> Optional[int]:
        if j >= len(self.entries):
            return 0
        b = self.entries[j].bound
        return None if b is None else b(steps)


def universal_combinator(catalog: FunctionalCatalog) -> Functional:
    """Input 1^e 0 sigma runs entry e on sigma; an all-ones input outputs nothing."""

    def fn(x: str, steps: int) -> str:
        e = x.find("0")
        if e < 0:
            return ""
        return catalog.eval(e, x[e + 1:], steps)

    return fn


def _parse_entry(name: str) -> Tuple[str, Optional[int]]:
    base, _, arg = name.partition(":")
    return base, (int(arg) if arg else None)


def make_functional(name: str, base: Optional[FunctionalCatalog] = None) -> CatalogEntry:
    kind, arg = _parse_entry(name)
    if kind == "identity":
        return CatalogEntry(name, identity, lambda s: s)
    if kind == "zeros":
        return CatalogEntry(name, zeros, lambda s: s)
    if kind == "even_bits":
        return CatalogEntry(name, even_bits, lambda s: (s + 1) // 2)
    if kind == "copy_delay":
        k = 2 if arg is None else arg
        return CatalogEntry(f"copy_delay:{k}", copy_with_delay(k), lambda s: max(0, s - k))
    if kind == "diverge_after":
        k = 3 if arg is None else arg
        return CatalogEntry(f"diverge_after:{k}", diverge_after(k), lambda s: min(s, k))
    if kind == "universal":
        if base is None or not len(base):
            raise ValueError("universal entry needs preceding entries to combine")
        inner = FunctionalCatalog(base.entries)
        bounds = [e.bound for e in inner.entries]
        bound = None if any(b is None for b in bounds) else (lambda s: max(b(s) for b in bounds))
        return CatalogEntry("universal", universal_combinator(inner), bound)
    raise ValueError(f"unknown functional {name!r}")


DEFAULT_FUNCTIONALS = ("identity", "zeros", "even_bits", "copy_delay:2", "diverge_after:3", "universal")


def build_catalog(names: Sequence[str] = DEFAULT_FUNCTIONALS) -> FunctionalCatalog:
    """Catalog from entry names; ``universal`` combines every entry listed before it."""
    cat = FunctionalCatalog()
    for name in names:
        cat.entries.append(make_functional(name, cat))
    return cat


# -- partial string-to-number functions -------------------------------------

def length_fn(rho: str, steps: int) -> Optional[int]:
    return len(rho) if steps >= len(rho) else None


def half_length(rho: str, steps: int) -> Optional[int]:
    return len(rho) // 2 if steps >= len(rho) else None


def block_step(b: int) -> PartialFn:
    def fn(rho: str, steps: int) -> Optional[int]:
        return b * (len(rho) // b) if steps >= len(rho) else None
    return fn


def nowhere(rho: str, steps: int) -> Optional[int]:
    return None


def slow_length(factor: int) -> PartialFn:
    def fn(rho: str, steps: int) -> Optional[int]:
        return len(rho) if steps >= factor * len(rho) + factor else None
    return fn


class PartialCatalog:
    """Indexed family of stage-bounded partial functions from strings to naturals.

    Convergence is stable: a value defined at ``steps`` is unchanged for
    every larger budget.  ``bound(e, L)`` bounds all values on strings of
    length <= L (``-1`` when nothing ever converges).
    """

    def __init__(self, entries: Iterable[CatalogEntry] = ()):
        self.entries: List[CatalogEntry] = list(entries)

    def register(self, name: str, fn: PartialFn, bound: Optional[Callable[[int], int]] = None) -> int:
        self.entries.append(CatalogEntry(name, fn, bound))
        return len(self.entries) - 1

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> List[str]:
        return [e.name for e in self.entries]

    def eval(self, e: int, rho: str, steps: int) -> Optional[int]:
        if e >= len(self.entries):
            return None
        return self.entries[e].fn(rho, steps)

    def bound(self, e: int, max_len: int) -> Optional[int]:
        if e >= len(self.entries):
            return -1
        b = self.entries[e].bound
        return None if b is None else b(max_len)


def make_partial(name: str) -> CatalogEntry:
    kind, arg = _parse_entry(name)
    if kind == "length":
        return CatalogEntry(name, length_fn, lambda L: L)
    if kind == "half_length":
        return CatalogEntry(name, half_length, lambda L: L // 2)
    if kind == "block_step":
        b = 3 if arg is None else arg
        return CatalogEntry(f"block_step:{b}", block_step(b), lambda L: L)
    if kind == "nowhere":
        return CatalogEntry(name, nowhere, lambda L: -1)
    if kind == "slow_length":
        k = 4 if arg is None else arg
        return CatalogEntry(f"slow_length:{k}", slow_length(k), lambda L: L)
    raise ValueError(f"unknown partial function {name!r}")


DEFAULT_PARTIALS = ("length", "half_length", "block_step:3", "nowhere", "slow_length:4")


def build_partials(names: Sequence[str] = DEFAULT_PARTIALS) -> PartialCatalog:
    return PartialCatalog(make_partial(n) for n in names)


def monotonize(f: Mapping[str, int]) -> Dict[str, int]:
    """f*(sigma) = max of f over the prefixes of sigma inside the domain."""
    out: Dict[str, int] = {}
    for sigma in sorted(f, key=len):
        best = f[sigma]
        for k in range(len(sigma) - 1, -1, -1):
            prev = out.get(sigma[:k])
            if prev is not None:
                best = max(best, prev)
                break
        out[sigma] = best
    return out


# -- test ledgers ------------------------------------------------------------

@dataclass(frozen=True)
class LedgerEntry:
    eta: str
    weight: Rational
    start: str
    end: str
    stage: int
    j: int
    e: Optional[int] = None


@dataclass
class TestLedger:
    mode: str
    entries: Dict[int, List[LedgerEntry]] = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def add(self, s: int, entry: LedgerEntry) -> None:
        self.entries.setdefault(s, []).append(entry)

    def levels(self) -> List[int]:
        return sorted(self.entries)

    def copy(self) -> "TestLedger":
        return TestLedger(self.mode, {s: list(v) for s, v in self.entries.items()})


def ledger_mass(ledger: TestLedger, s: int, j: Optional[int] = None) -> Rational:
    total = ZERO
    for entry in ledger.entries.get(s, ()):
        if j is None or entry.j == j:
            total += entry.weight
    return total


# -- predicates --------------------------------------------------------------

def prefix_open(state, tau: str) -> bool:
    """Condition (b): every prefix of tau of length 1..|tau| has delay < 1."""
    return all(state.counter(tau[:k]) != 1 for k in range(1, len(tau) + 1))


class AlwaysB:
    mode = "always"

    def requirement(self, i: int):
        return DUMMY

    def may_fire(self, sigma: str, n: int) -> bool:
        return True

    def condition(self, sigma: str, tau: str) -> bool:
        return True

    def holds(self, state, sigma: str, tau: str) -> bool:
        return tau.startswith(sigma) and prefix_open(state, tau) and self.condition(sigma, tau)

    def ledger_entry(self, edge):
        return None

    def describe(self) -> dict:
        return {"mode": self.mode}


def b_always(state, sigma: str, tau: str) -> bool:
    return AlwaysB().holds(state, sigma, tau)


class MLRB(AlwaysB):
    mode = "mlr"

    def __init__(self, catalog: FunctionalCatalog):
        self.catalog = catalog

    def requirement(self, i: int):
        return requirement_of_task(i, self.mode)

    def threshold(self, sigma: str):
        req = self.requirement(task(len(sigma)))
        if req == DUMMY:
            return None, None
        return req, pair_threshold(string_index(sigma), req[1])

    def may_fire(self, sigma: str, n: int) -> bool:
        req, thr = self.threshold(sigma)
        if req is None:
            return False
        b = self.catalog.bound(req[0], n)
        return b is None or b > thr

    def condition(self, sigma: str, tau: str) -> bool:
        req, thr = self.threshold(sigma)
        if req is None:
            return False
        return len(self.catalog.eval(req[0], tau, len(tau))) > thr

    def ledger_entry(self, edge):
        req, thr = self.threshold(edge.start)
        j, s = req
        eta = self.catalog.eval(j, edge.end, len(edge.end))
        return s, LedgerEntry(eta, pow2(-thr), edge.start, edge.end, edge.stage_added, j)

    def describe(self) -> dict:
        return {"mode": self.mode, "catalog": self.catalog.names}


def b_mlr(state, sigma: str, tau: str, catalog: FunctionalCatalog) -> bool:
    return MLRB(catalog).holds(state, sigma, tau)


class FRandB(MLRB):
    mode = "frand"

    def __init__(self, catalog: FunctionalCatalog, partials: PartialCatalog):
        super().__init__(catalog)
        self.partials = partials

    def may_fire(self, sigma: str, n: int) -> bool:
        req, thr = self.threshold(sigma)
        if req is None:
            return False
        j, _, e = req
        out_len = self.catalog.bound(j, n)
        if out_len is None:
            return True
        b = self.partials.bound(e, out_len)
        return b is None or b > thr

    def witness(self, sigma: str, tau: str) -> Optional[str]:
        """Shortest rho <= Phi_j(tau) whose value converges above the threshold."""
        req, thr = self.threshold(sigma)
        if req is None:
            return None
        j, _, e = req
        n = len(tau)
        out = self.catalog.eval(j, tau, n)
        for k in range(len(out) + 1):
            v = self.partials.eval(e, out[:k], n)
            if v is not None and v > thr:
                return out[:k]
        return None

    def condition(self, sigma: str, tau: str) -> bool:
        return self.witness(sigma, tau) is not None

    def f_star(self, e: int, eta: str, steps: int) -> Optional[int]:
        """Monotonized value at eta over the prefixes that converge within ``steps``."""
        vals = {}
        for k in range(len(eta) + 1):
            v = self.partials.eval(e, eta[:k], steps)
            if v is not None:
                vals[eta[:k]] = v
        if not vals:
            return None
        star = monotonize(vals)
        return star[max(star, key=len)]

    def ledger_entry(self, edge):
        req, _ = self.threshold(edge.start)
        j, s, e = req
        n = len(edge.end)
        eta = self.catalog.eval(j, edge.end, n)
        fs = self.f_star(e, eta, n)
        return s, LedgerEntry(eta, pow2(-fs), edge.start, edge.end, edge.stage_added, j, e)

    def describe(self) -> dict:
        return {"mode": self.mode, "catalog": self.catalog.names, "partials": self.partials.names}


def b_frand(state, sigma: str, tau: str, catalog: FunctionalCatalog, partials: PartialCatalog) -> bool:
    return FRandB(catalog, partials).holds(state, sigma, tau)
