import itertools

import pytest
from hypothesis import given, strategies as st

from conftest import bits
from semiflow.strings import (
    DUMMY, decode, decode_task, encode, extension_range, from_index, next_task_position,
    pair_task, pair_threshold, requirement_of_task, string_index, task, task_positions, value,
)


def schedule(length):
    """0,1, 0,1,2, 0,1,2,3, ... written out block by block."""
    out = []
    k = 1
    while len(out) < length:
        out.extend(range(k + 1))
        k += 1
    return out[:length]


def test_task_schedule_against_blocks():
    assert [task(n) for n in range(500)] == schedule(500)


@pytest.mark.parametrize("n,i", [(0, 0), (4, 2), (13, 4)])
def test_task_values(n, i):
    assert task(n) == i


@pytest.mark.parametrize("sigma,idx", [("", 0), ("0", 1), ("1", 2), ("01", 4), ("00", 3)])
def test_length_lex_index(sigma, idx):
    assert string_index(sigma) == idx


def test_length_lex_enumeration():
    order = [""] + ["".join(p) for n in range(1, 6) for p in itertools.product("01", repeat=n)]
    assert [string_index(s) for s in order] == list(range(len(order)))


def test_pairings():
    assert pair_task(0, 0) == 0
    assert pair_task(1, 1) == 4
    assert decode_task(2) == (0, 1)
    assert pair_threshold(0, 0) == 1
    assert pair_threshold(1, 0) == 5


def test_requirements():
    assert requirement_of_task(0, "mlr") == DUMMY
    assert requirement_of_task(1, "mlr") == (0, 0)
    assert requirement_of_task(3, "mlr") == (0, 1)
    assert requirement_of_task(5, "always") == DUMMY
    assert requirement_of_task(0, "frand") == DUMMY
    j, rest = decode_task(6)
    assert requirement_of_task(7, "frand") == (j, *decode_task(rest))


@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_cantor_pairing_inverts(m, n):
    assert decode_task(pair_task(m, n)) == (m, n)


@given(st.integers(0, 200), st.integers(0, 200))
def test_threshold_dominates_arguments(m, n):
    assert pair_threshold(m, n) >= m + n


def test_threshold_injective():
    seen = {pair_threshold(m, n) for m in range(64) for n in range(10)}
    assert len(seen) == 64 * 10


@given(st.integers(0, 6), st.integers(0, 2000))
def test_next_position(i, after):
    n = next_task_position(i, after)
    assert n > after and task(n) == i
    assert all(task(k) != i for k in range(after + 1, n))


@given(st.integers(0, 8))
def test_positions_increase(i):
    pos = list(itertools.islice(task_positions(i), 20))
    assert pos == sorted(pos) and all(task(n) == i for n in pos)
    assert pos[0] == min(n for n in range(300) if task(n) == i)


@given(bits(max_size=16))
def test_encoding_round_trip(sigma):
    assert decode(encode(sigma)) == sigma
    assert from_index(len(sigma), value(sigma)) == sigma


@given(bits(max_size=10), st.integers(0, 6))
def test_extension_range_is_contiguous(sigma, extra):
    n = len(sigma) + extra
    lo, hi = extension_range(len(sigma), value(sigma), n)
    assert [from_index(n, i) for i in range(lo, hi)] == sorted(
        sigma + "".join(t) for t in itertools.product("01", repeat=extra))


def test_bad_token_rejected():
    with pytest.raises(ValueError):
        decode("012")
