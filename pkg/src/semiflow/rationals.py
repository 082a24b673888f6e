"""Exact rationals.

Every flow, delay, mass and bound in the package is a ``Rational``.  The
type is ``gmpy2.mpq``: immutable, always in lowest terms with a positive
denominator, and an order of magnitude faster than ``fractions.Fraction``
on the dense level tables.
"""
from __future__ import annotations

from typing import Union

import gmpy2
from gmpy2 import mpq

Rational = type(mpq(0))

ZERO = mpq(0)
ONE = mpq(1)
HALF = mpq(1, 2)


class ConstructionError(ValueError):
    """Raised for an impossible rational (zero denominator, division by zero)."""


def rat_make(num: int, den: int = 1) -> Rational:
    if den == 0:
        raise ConstructionError(f"zero denominator in {num}/{den}")
    return mpq(num, den)


def as_rat(x: Union[int, str, Rational]) -> Rational:
    """Coerce an int, a Rational or a ``"num/den"`` string."""
    if isinstance(x, str):
        return parse_rat(x)
    if isinstance(x, Rational):
        return x
    if isinstance(x, int):
        return mpq(x)
    raise TypeError(f"cannot make an exact rational from {type(x).__name__}")


def add(a, b) -> Rational:
    return mpq(a) + mpq(b)


def sub(a, b) -> Rational:
    return mpq(a) - mpq(b)


def mul(a, b) -> Rational:
    return mpq(a) * mpq(b)


def div(a, b) -> Rational:
    if b == 0:
        raise ConstructionError("division by zero")
    return mpq(a) / mpq(b)


def compare(a, b) -> str:
    """Return ``"less"``, ``"equal"`` or ``"greater"``."""
    c = gmpy2.cmp(mpq(a), mpq(b))
    return "less" if c < 0 else ("greater" if c > 0 else "equal")


def format_rat(x) -> str:
    """Normal-form ``"num/den"`` (``0`` is ``"0/1"``, ``2`` is ``"2/1"``)."""
    x = mpq(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rat(s: str) -> Rational:
    s = s.strip()
    if "/" in s:
        num, den = s.split("/", 1)
        try:
            n, d = int(num), int(den)
        except ValueError:
            raise ConstructionError(f"malformed rational {s!r}") from None
        return rat_make(n, d)
    try:
        return mpq(int(s))
    except ValueError:
        raise ConstructionError(f"malformed rational {s!r}") from None


def pow2(k: int) -> Rational:
    """2**k for any integer k, exactly."""
    return mpq(1 << k) if k >= 0 else mpq(1, 1 << -k)
