import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from ugw.curve import (
    IDENTITY,
    PAPER160,
    TINY97,
    CurvePoint,
    InvalidPoint,
    InvalidScalar,
    decode_point,
    encode_point,
    negate,
    point_add,
    random_scalar,
    scalar_mul,
)


def enumerate_points(p, a, b):
    """Brute force over F_p x F_p, independent of the package."""
    return [
        CurvePoint(x, y)
        for x in range(p)
        for y in range(p)
        if (y * y - x**3 - a * x - b) % p == 0
    ]


TINY_POINTS = enumerate_points(97, 2, 3)
TINY_GROUP = TINY_POINTS + [IDENTITY]


def test_tiny97_enumeration():
    assert len(TINY_GROUP) == 100
    assert all(TINY97.contains(P) for P in TINY_POINTS)


def test_generator_order_by_enumeration():
    # walk G, 2G, ... until the identity
    P, order = TINY97.G, 1
    while not P.is_identity:
        P = point_add(P, TINY97.G, TINY97)
        order += 1
    assert order == TINY97.n == 50
    assert len(TINY_GROUP) % order == 0


def test_paper160_generator_order():
    n = PAPER160.n
    assert scalar_mul(n - 1, PAPER160.G, PAPER160) == negate(PAPER160.G, PAPER160)
    assert PAPER160.p.bit_length() == 160 and n.bit_length() == 160


def test_identity_is_neutral():
    for P in TINY_GROUP:
        assert point_add(P, IDENTITY, TINY97) == P
        assert point_add(IDENTITY, P, TINY97) == P


def test_inverse():
    for P in TINY_GROUP:
        assert point_add(P, negate(P, TINY97), TINY97) == IDENTITY


# frozen from an independent affine group-law script run before the build
@pytest.mark.parametrize(
    "P, Q, expected",
    [
        ((0, 10), (3, 6), (85, 71)),
        ((0, 10), (0, 10), (65, 32)),
        ((1, 43), (4, 47), (83, 74)),
    ],
)
def test_known_sums(P, Q, expected):
    assert point_add(CurvePoint(*P), CurvePoint(*Q), TINY97) == CurvePoint(*expected)


def test_known_multiple():
    assert scalar_mul(17, TINY97.G, TINY97) == CurvePoint(1, 43)


def test_group_laws_exhaustive():
    add = lambda P, Q: point_add(P, Q, TINY97)  # noqa: E731
    for P, Q in itertools.product(TINY_GROUP, repeat=2):
        assert add(P, Q) == add(Q, P)
        assert TINY97.contains(add(P, Q))
    rng = random.Random(7)
    for _ in range(20000):
        P, Q, R = (rng.choice(TINY_GROUP) for _ in range(3))
        assert add(add(P, Q), R) == add(P, add(Q, R))


def test_scalar_mul_matches_repeated_addition():
    for P in TINY_GROUP:
        acc = IDENTITY
        for k in range(1, TINY97.n):
            acc = point_add(acc, P, TINY97)
            assert scalar_mul(k, P, TINY97) == acc


def test_scalar_mul_small_cases_paper160():
    G = PAPER160.G
    assert scalar_mul(1, G, PAPER160) == G
    assert scalar_mul(2, G, PAPER160) == point_add(G, G, PAPER160)
    assert scalar_mul(3, G, PAPER160) == point_add(point_add(G, G, PAPER160), G, PAPER160)


@pytest.mark.parametrize("k", [0, -1, TINY97.n, TINY97.n + 5])
def test_scalar_range_rejected(k):
    with pytest.raises(InvalidScalar):
        scalar_mul(k, TINY97.G, TINY97)


def test_off_curve_rejected():
    bad = CurvePoint(0, 11)
    with pytest.raises(InvalidPoint):
        point_add(bad, TINY97.G, TINY97)
    with pytest.raises(InvalidPoint):
        scalar_mul(3, bad, TINY97)
    with pytest.raises(InvalidPoint):
        point_add(CurvePoint(97, 10), TINY97.G, TINY97)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, PAPER160.n - 1), st.integers(1, PAPER160.n - 1))
def test_scalar_mul_distributes(a, b):
    G = PAPER160.G
    s = (a + b) % PAPER160.n
    lhs = scalar_mul(s, G, PAPER160) if s else IDENTITY
    rhs = point_add(scalar_mul(a, G, PAPER160), scalar_mul(b, G, PAPER160), PAPER160)
    assert lhs == rhs


def test_point_encoding_round_trip():
    P = scalar_mul(12345, PAPER160.G, PAPER160)
    data = encode_point(P)
    assert len(data) == 40
    assert decode_point(data, PAPER160) == P
    # tiny97 points use the same fixed width
    assert len(encode_point(TINY97.G)) == 40
    with pytest.raises(InvalidPoint):
        encode_point(IDENTITY)
    with pytest.raises(InvalidPoint):
        decode_point(data[:-1], PAPER160)
    with pytest.raises(InvalidPoint):
        decode_point(data[:-1] + bytes([data[-1] ^ 1]), PAPER160)


def test_random_scalar_reproducible_and_in_range():
    a = [random_scalar(random.Random(99), PAPER160) for _ in range(3)]
    r1, r2 = random.Random(5), random.Random(5)
    assert [random_scalar(r1, PAPER160) for _ in range(50)] == [
        random_scalar(r2, PAPER160) for _ in range(50)
    ]
    assert a[0] == a[1] == a[2]
    rng = random.Random(6)
    assert all(1 <= random_scalar(rng, TINY97) <= TINY97.n - 1 for _ in range(10_000))


def test_random_scalar_uniform_chi_square():
    rng = random.Random(2024)
    span = TINY97.n - 1  # values 1..49
    buckets = [0] * 16
    sizes = [0] * 16
    for v in range(1, TINY97.n):
        sizes[(v - 1) * 16 // span] += 1
    draws = 20_000
    for _ in range(draws):
        buckets[(random_scalar(rng, TINY97) - 1) * 16 // span] += 1
    expected = [draws * s / span for s in sizes]
    assert chisquare(buckets, expected).pvalue > 0.01
