"""Semi-measures and functionals at desk scale.

* ``lambda_phi`` -- the push-forward of the uniform measure through a
  stage-bounded catalog functional, summed over minimal inputs.
* ``mixture_lambda`` -- finite mixture with weights 2^-(e+1), the measure
  induced by ``universal_combinator`` over a finite catalog (an
  approximation only; no finite catalog is universal).
* ``pbar_estimate`` -- level sums of P below a node, a certified upper
  bound on the largest measure under P.
* ``allocate_intervals`` / ``sample`` -- a functional whose induced
  semi-measure is the table's P: contiguous interval allocation over [0,1)
  and lazy bit-by-bit descent of a uniformly drawn point.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from gmpy2 import mpq

from .flow import FlowTable, _objects
from .rationals import ONE, ZERO, Rational, pow2
from .requirements import FunctionalCatalog
from .strings import from_index, value

GENERATOR = "python-random-mt19937"

COMPLETE = "complete-at-depth"
EXHAUSTED = "budget-exhausted"


class AllocationError(ValueError):
    pass


# -- lambda_Phi -------------------------------------------------------------------

def lambda_phi(catalog: FunctionalCatalog, j: int, sigma: str, steps: int) -> Rational:
    """Sum of 2^-|x| over minimal inputs x (|x| <= steps) whose output extends sigma."""
    total = ZERO
    longest = catalog.bound(j, steps)
    stack = [""]
    while stack:
        x = stack.pop()
        out = catalog.eval(j, x, steps)
        if out.startswith(sigma):
            total += pow2(-len(x))
        elif sigma.startswith(out) and len(x) < steps and (longest is None or len(out) < longest):
            # outputs only grow along extensions; incompatible or saturated branches are dead
            stack.append(x + "1")
            stack.append(x + "0")
    return total


def lambda_counts(fn, steps: int, out_depth: Optional[int] = None, bound: Optional[int] = None) -> List[np.ndarray]:
    """For every output string sigma, how many length-``steps`` inputs map above it.

    ``lambda_phi(sigma) == counts[|sigma|][value(sigma)] / 2**steps``.  Levels
    beyond ``out_depth`` (default: ``steps``) are not tabulated.  Outputs only
    grow along input extensions, so once a prefix's output fills ``out_depth``
    or reaches ``bound`` (the longest output possible at ``steps``) its whole
    cylinder of inputs is credited at once.
    """
    out_depth = steps if out_depth is None else out_depth
    ends = [np.zeros(1 << n, dtype=np.int64) for n in range(out_depth + 1)]
    stack = [""]
    while stack:
        x = stack.pop()
        out = fn(x, steps)
        frozen = len(out) >= out_depth or (bound is not None and len(out) >= bound)
        if frozen or len(x) == steps:
            out = out[:out_depth]
            ends[len(out)][value(out)] += 1 << (steps - len(x))
        else:
            stack.append(x + "1")
            stack.append(x + "0")
    counts = [None] * (out_depth + 1)
    counts[out_depth] = ends[out_depth]
    for n in range(out_depth - 1, -1, -1):
        counts[n] = ends[n] + counts[n + 1][0::2] + counts[n + 1][1::2]
    return counts


def lambda_table(catalog: FunctionalCatalog, j: int, steps: int, out_depth: Optional[int] = None) -> List[np.ndarray]:
    """All lambda_Phi values to ``out_depth`` as exact rationals, one array per level."""
    counts = lambda_counts(lambda x, s: catalog.eval(j, x, s), steps, out_depth, catalog.bound(j, steps))
    scale = pow2(-steps)
    return [_objects([mpq(int(c)) * scale for c in level]) for level in counts]


def mixture_lambda(catalog: FunctionalCatalog, sigma: str, steps: int, entries: Optional[Iterable[int]] = None) -> Rational:
    """sum_e 2^-(e+1) lambda_{Phi_e}(sigma), entry e granted steps - e - 1 input bits.

    This is exactly lambda of the universal combinator at ``steps`` for
    entries whose output does not depend on unused step budget.
    """
    entries = range(len(catalog)) if entries is None else entries
    total = ZERO
    for e in entries:
        inner = steps - e - 1
        if inner >= 0:
            total += pow2(-(e + 1)) * lambda_phi(catalog, e, sigma, inner)
    return total


# -- the P-bar estimator ------------------------------------------------------------

def pbar_levels(table: FlowTable, sigma: str) -> List[Rational]:
    """Sum of P over the length-n extensions of sigma, for n = |sigma| .. depth."""
    m, idx = len(sigma), value(sigma)
    sums = []
    for n in range(m, table.depth + 1):
        shift = n - m
        sums.append(mpq(table.P[n][idx << shift:(idx + 1) << shift].sum()))
    return sums


def pbar_estimate(table: FlowTable, sigma: str) -> Tuple[Rational, int]:
    sums = pbar_levels(table, sigma)
    for a, b in zip(sums, sums[1:]):
        if b > a:
            raise AssertionError(f"level sums below {sigma!r} increased: {a} -> {b}")
    return sums[-1], table.depth


def retained_lower_bound(table: FlowTable) -> Rational:
    """min_n S_n: lower bound for the mass P-bar puts on the support."""
    return min(table.S)


# -- interval allocation -------------------------------------------------------------

@dataclass
class IntervalMap:
    depth: int
    left: List[np.ndarray]
    length: List[np.ndarray]

    def interval(self, sigma: str) -> Tuple[Rational, Rational]:
        n, i = len(sigma), value(sigma)
        lo = self.left[n][i]
        return lo, lo + self.length[n][i]


def semimeasure_violation(P: Sequence[np.ndarray]) -> Optional[str]:
    """First node breaking P(eps) <= 1 or P(s) >= P(s0) + P(s1), or None."""
    if P[0][0] > ONE or P[0][0] < 0:
        return ""
    for n in range(len(P) - 1):
        bad = np.flatnonzero(P[n] < P[n + 1][0::2] + P[n + 1][1::2])
        if len(bad):
            return from_index(n, int(bad[0]))
    return None


def allocate_intervals(table: FlowTable) -> IntervalMap:
    witness = semimeasure_violation(table.P)
    if witness is not None:
        raise AllocationError(f"semi-measure law fails at {witness or 'the root'!r}; refusing to allocate")
    left = [_objects([ZERO])]
    for n in range(table.depth):
        parent = left[n]
        lo = np.empty(2 << n, dtype=object)
        lo[0::2] = parent
        lo[1::2] = parent + table.P[n + 1][0::2]
        left.append(lo)
    return IntervalMap(table.depth, left, [p.copy() for p in table.P])


# -- sampler ----------------------------------------------------------------------------

class _LazyPoint:
    """A uniform point of [0,1) revealed one bit at a time: x in [lo/2^b, (lo+1)/2^b)."""

    def __init__(self, rng: random.Random, budget: int):
        self.rng, self.budget = rng, budget
        self.lo, self.bits = 0, 0

    def below(self, c: Rational) -> Optional[bool]:
        """Is x < c?  None when the budget runs out first."""
        p, q = c.numerator, c.denominator
        while True:
            scale = 1 << self.bits
            if (self.lo + 1) * q <= p * scale:
                return True
            if self.lo * q >= p * scale:
                return False
            if self.bits >= self.budget:
                return None
            self.lo = 2 * self.lo + self.rng.getrandbits(1)
            self.bits += 1


def sample(imap: IntervalMap, seed: Union[int, random.Random], bit_budget: int) -> Tuple[str, str]:
    """Deepest sigma with x in I(sigma) that the budget decides, and a status.

    A point beyond every child interval has dissipated: the current node is
    final and the status is complete.
    """
    if bit_budget < 1:
        raise ValueError("bit budget must be at least 1")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    x = _LazyPoint(rng, bit_budget)
    inside = x.below(imap.length[0][0])
    if inside is None:
        return "", EXHAUSTED
    if not inside:
        return "", COMPLETE
    n, idx = 0, 0
    while n < imap.depth:
        lo = imap.left[n][idx]
        c0 = lo + imap.length[n + 1][2 * idx]
        c1 = c0 + imap.length[n + 1][2 * idx + 1]
        left_side = x.below(c0)
        if left_side is None:
            return from_index(n, idx), EXHAUSTED
        if left_side:
            n, idx = n + 1, 2 * idx
            continue
        right_side = x.below(c1)
        if right_side is None:
            return from_index(n, idx), EXHAUSTED
        if not right_side:
            return from_index(n, idx), COMPLETE
        n, idx = n + 1, 2 * idx + 1
    return from_index(n, idx), COMPLETE


def sample_seeds(seed: int, count: int) -> List[int]:
    """Per-sample 64-bit seeds drawn from one master generator."""
    master = random.Random(seed)
    return [master.getrandbits(64) for _ in range(count)]


def sample_many(imap: IntervalMap, seed: int, count: int, bit_budget: int) -> List[Tuple[int, str, str]]:
    """(seed, output, status) per sample; any line can be replayed alone with ``sample``."""
    return [(s, *sample(imap, s, bit_budget)) for s in sample_seeds(seed, count)]


def cylinder_counts(outputs: Iterable[str], depth: int) -> dict:
    """How many outputs extend each sigma with |sigma| <= depth."""
    counts = {}
    for out in outputs:
        for k in range(min(len(out), depth) + 1):
            counts[out[:k]] = counts.get(out[:k], 0) + 1
    return counts
