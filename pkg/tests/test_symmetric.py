import hashlib
import random

import pytest
from hypothesis import given, strategies as st

from ugw.curve import IDENTITY, PAPER160, TINY97, InvalidPoint, random_scalar, scalar_mul
from ugw.symmetric import (
    hash160,
    hash_to_scalar,
    kbkdf,
    sym_decrypt,
    sym_encrypt,
    xor,
)

digests = st.binary(min_size=20, max_size=20)


def test_hash160_known_answer():
    # SHA-256("") truncated to 160 bits
    assert hash160(b"").hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4"
    assert hash160(b"abc") == hashlib.sha256(b"abc").digest()[:20]


def test_hash160_deterministic_and_sensitive():
    m = b"gateway login"
    assert hash160(m) == hash160(m)
    flipped = bytes([m[0] ^ 1]) + m[1:]
    assert hash160(m) != hash160(flipped)
    assert len(hash160(m)) == 20


def test_hash160_avalanche():
    rng = random.Random(3)
    total = 0
    trials = 500
    for _ in range(trials):
        m = bytearray(rng.randbytes(32))
        h1 = hash160(bytes(m))
        m[rng.randrange(32)] ^= 1 << rng.randrange(8)
        h2 = hash160(bytes(m))
        total += bin(int.from_bytes(xor(h1, h2), "big")).count("1")
    assert 75 < total / trials < 85


@given(digests, digests, digests)
def test_digest_xor_algebra(a, b, c):
    assert xor(a, b) == xor(b, a)
    assert xor(xor(a, b), c) == xor(a, xor(b, c))
    assert xor(a, a) == bytes(20)


def test_kbkdf_determinism_and_labels():
    P = scalar_mul(777, PAPER160.G, PAPER160)
    assert kbkdf(P, b"x") == kbkdf(P, b"x")
    assert kbkdf(P, b"x") != kbkdf(P, b"y")
    assert len(kbkdf(P)) == 16
    with pytest.raises(InvalidPoint):
        kbkdf(IDENTITY)


def test_kbkdf_ecdh_symmetry():
    rng = random.Random(11)
    G = PAPER160.G
    for _ in range(1000):
        ur, gwr = random_scalar(rng, PAPER160), random_scalar(rng, PAPER160)
        d_u = scalar_mul(ur, G, PAPER160)
        s_i = scalar_mul(gwr, G, PAPER160)
        assert kbkdf(scalar_mul(ur, s_i, PAPER160), b"L") == kbkdf(
            scalar_mul(gwr, d_u, PAPER160), b"L"
        )


@pytest.mark.parametrize("length", [0, 1, 16, 20, 40, 41, 100])
def test_sym_round_trip_and_length(length):
    key = bytes(range(16))
    pt = random.Random(length).randbytes(length)
    ct = sym_encrypt(key, b"ZLOGIN", pt)
    assert len(ct) == len(pt)
    assert sym_decrypt(key, b"ZLOGIN", ct) == pt


def test_sym_all_zero_plaintext():
    key = b"k" * 16
    assert sym_decrypt(key, b"NS", sym_encrypt(key, b"NS", bytes(16))) == bytes(16)


def test_sym_deterministic_and_context_separated():
    key = b"\x01" * 16
    assert sym_encrypt(key, b"MID", b"u" * 20) == sym_encrypt(key, b"MID", b"u" * 20)
    assert sym_encrypt(key, b"MID", b"u" * 20) != sym_encrypt(key, b"NS", b"u" * 20)


def test_sym_distinct_keys_distinct_ciphertexts():
    rng = random.Random(8)
    uid = rng.randbytes(20)
    for _ in range(100):
        k1, k2 = rng.randbytes(16), rng.randbytes(16)
        assert sym_encrypt(k1, b"MID", uid) != sym_encrypt(k2, b"MID", uid)


def test_sym_wrong_key():
    rng = random.Random(9)
    pt = b"secret identity....."
    ct = sym_encrypt(rng.randbytes(16), b"MID", pt)
    assert sym_decrypt(rng.randbytes(16), b"MID", ct) != pt


def test_sym_decrypt_golden():
    key = bytes.fromhex("b97f69f75edf35c71fdad37066eae91d")
    ct = bytes.fromhex("90ad9db136bb68599f576c73661e2be659b00d0c425d9a12d6d03614addabdc4")
    assert sym_decrypt(key, b"MID", ct) == b"frozen plaintext for golden test"


def test_hash_to_scalar_range_and_determinism():
    rng = random.Random(10)
    for _ in range(10_000):
        k = hash_to_scalar(rng.randbytes(8), TINY97)
        assert 1 <= k <= TINY97.n - 1
    assert hash_to_scalar(b"hunter22", PAPER160) == hash_to_scalar(b"hunter22", PAPER160)
    with pytest.raises(ValueError):
        hash_to_scalar(b"", PAPER160)


def test_hash_to_scalar_no_collisions_paper160():
    seen = {hash_to_scalar(f"password-{i}".encode(), PAPER160) for i in range(10_000)}
    assert len(seen) == 10_000
