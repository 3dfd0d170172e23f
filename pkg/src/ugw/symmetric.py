"""160-bit hash, point-to-key derivation and the length-preserving stream cipher.

The cipher is deterministic for a fixed (key, context): MID has to stay
stable across logins. It carries no authentication tag, so ciphertext
integrity comes only from the protocol-level checks (PID, SQ_i, on-curve
decoding).
"""

from __future__ import annotations

import hashlib

from . import trace
from .curve import CONSTANTS, CurveParams, CurvePoint, InvalidPoint, encode_point

HASH_NAME = CONSTANTS.get("encoding", "hash")
DIGEST_BYTES = CONSTANTS.getint("encoding", "digest_bytes")
KEY_BYTES = CONSTANTS.getint("encoding", "key_bytes")


def digest(data: bytes) -> bytes:
    """Uncounted hash160, for derivations that are not protocol hash steps."""
    return hashlib.sha256(data).digest()[:DIGEST_BYTES]


def hash160(data: bytes) -> bytes:
    trace.record("hash")
    return digest(data)


def xor(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError(f"xor of unequal lengths {len(a)} and {len(b)}")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def kbkdf(shared: CurvePoint, label: bytes = b"") -> bytes:
    """128-bit key from a shared point; same point and label give the same key."""
    if shared.is_identity:
        raise InvalidPoint("degenerate shared secret (identity point)")
    trace.record("kdf")
    return digest(label + encode_point(shared))[:KEY_BYTES]


def _keystream(key: bytes, context: bytes, length: int) -> bytes:
    blocks = []
    for counter in range(-(-length // DIGEST_BYTES)):
        blocks.append(digest(key + context + counter.to_bytes(4, "big")))
    return b"".join(blocks)[:length]


def sym_encrypt(key: bytes, context: bytes, plaintext: bytes) -> bytes:
    trace.record("sym")
    if not plaintext:
        return b""
    return xor(plaintext, _keystream(key, context, len(plaintext)))


def sym_decrypt(key: bytes, context: bytes, ciphertext: bytes) -> bytes:
    trace.record("sym")
    if not ciphertext:
        return b""
    return xor(ciphertext, _keystream(key, context, len(ciphertext)))


def hash_to_scalar(data: bytes, params: CurveParams) -> int:
    """Map bytes into [1, n-1]."""
    if not data:
        raise ValueError("hash_to_scalar needs non-empty input")
    trace.record("hash_to_scalar")
    return int.from_bytes(digest(data), "big") % (params.n - 1) + 1
