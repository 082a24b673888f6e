"""Binary strings, string positions, pairings and the task schedule.

Strings are plain ``str`` over ``"01"``; the empty string is ``""`` in
memory and ``"e"`` on disk.  Internally the engine addresses a string of
length ``n`` by ``(n, int(sigma, 2))`` so that the length-``n`` extensions
of ``sigma`` form the contiguous index range returned by :func:`extension_range`.
"""
from __future__ import annotations

from math import isqrt
from typing import Iterator, Tuple, Union

EMPTY_TOKEN = "e"
DUMMY = "dummy"

Requirement = Union[str, Tuple[int, int], Tuple[int, int, int]]


def check_bits(sigma: str) -> str:
    if any(c not in "01" for c in sigma):
        raise ValueError(f"not a binary string: {sigma!r}")
    return sigma


def encode(sigma: str) -> str:
    return sigma if sigma else EMPTY_TOKEN


def decode(token: str) -> str:
    return "" if token == EMPTY_TOKEN else check_bits(token)


def is_prefix(sigma: str, tau: str) -> bool:
    """sigma is an initial segment of tau (non-strict)."""
    return tau.startswith(sigma)


def is_strict_prefix(sigma: str, tau: str) -> bool:
    return len(sigma) < len(tau) and tau.startswith(sigma)


def value(sigma: str) -> int:
    return int(sigma, 2) if sigma else 0


def from_index(n: int, idx: int) -> str:
    return format(idx, f"0{n}b") if n else ""


def extension_range(n: int, idx: int, target_len: int) -> Tuple[int, int]:
    """Index range [lo, hi) of the length-``target_len`` extensions of (n, idx)."""
    shift = target_len - n
    return idx << shift, (idx + 1) << shift


def strings_of_length(n: int) -> Iterator[str]:
    for idx in range(1 << n):
        yield from_index(n, idx)


def string_index(sigma: str) -> int:
    """Position of sigma in length-lexicographic order (eps, 0, 1, 00, ...)."""
    return (1 << len(sigma)) - 1 + value(sigma)


def pair_task(m: int, n: int) -> int:
    """Cantor pairing; used only to pack requirement indices into tasks."""
    return (m + n) * (m + n + 1) // 2 + n


def decode_task(z: int) -> Tuple[int, int]:
    if z < 0:
        raise ValueError("negative pair code")
    w = (isqrt(8 * z + 1) - 1) // 2
    n = z - w * (w + 1) // 2
    return w - n, n


def pair_threshold(m: int, n: int) -> int:
    """2**(n+1) * (2m+1) - 1.

    Injective, at least m + n, and sum over m of 2**-pair_threshold(m, s)
    stays below 2**-s, which is what the test-mass bounds need.
    """
    return (1 << (n + 1)) * (2 * m + 1) - 1


def _block_start(k: int) -> int:
    return (k - 1) * (k + 2) // 2


def task(n: int) -> int:
    """0,1, 0,1,2, 0,1,2,3, ...: block k >= 1 lists 0..k."""
    if n < 0:
        raise ValueError("negative stage")
    k = (isqrt(8 * n + 9) - 1) // 2
    return n - _block_start(k)


def task_positions(i: int) -> Iterator[int]:
    """All n with task(n) == i, increasing."""
    k = max(i, 1)
    while True:
        yield _block_start(k) + i
        k += 1


def next_task_position(i: int, after: int) -> int:
    """Least n > after with task(n) == i."""
    # block k holds i at _block_start(k) + i; jump near the right block first
    k = max(i, 1, (isqrt(8 * max(after, 0) + 9) - 1) // 2 - 1)
    while _block_start(k) + i <= after:
        k += 1
    return _block_start(k) + i


def requirement_of_task(i: int, mode: str) -> Requirement:
    """Task 0 is a dummy; task i >= 1 carries requirement decode_task(i - 1).

    ``mode`` is ``"mlr"`` for (j, s) pairs and ``"frand"`` for (j, s, e)
    triples.  Any other mode has no requirements.
    """
    if i == 0:
        return DUMMY
    j, rest = decode_task(i - 1)
    if mode == "mlr":
        return (j, rest)
    if mode == "frand":
        s, e = decode_task(rest)
        return (j, s, e)
    return DUMMY
