"""Authenticated echo frames under a derived session key.

request  = sid:8 || counter:8 || ciphertext || tag:16
response =          counter:8 || ciphertext || tag:16
"""

from __future__ import annotations

import hashlib
import hmac

from .errors import IntegrityError, MalformedMessage
from .symmetric import digest, sym_decrypt, sym_encrypt

TAG_BYTES = 16
SID_BYTES = 8
U2G, G2U = b"U2G", b"G2U"


def session_id(s_k: bytes) -> bytes:
    return digest(b"SID" + s_k)[:SID_BYTES]


def _keys(s_k: bytes):
    return digest(b"ECHO-ENC" + s_k)[:16], digest(b"ECHO-MAC" + s_k)


def seal(s_k: bytes, direction: bytes, counter: int, message: bytes) -> bytes:
    enc, mac = _keys(s_k)
    ctr = counter.to_bytes(8, "big")
    ct = sym_encrypt(enc, b"ECHO" + direction + ctr, message)
    tag = hmac.new(mac, direction + session_id(s_k) + ctr + ct, hashlib.sha256).digest()[:TAG_BYTES]
    return ctr + ct + tag


def open_sealed(s_k: bytes, direction: bytes, frame: bytes):
    """Returns (counter, plaintext); raises IntegrityError on a bad tag."""
    if len(frame) < 8 + TAG_BYTES:
        raise MalformedMessage("echo frame too short")
    enc, mac = _keys(s_k)
    ctr, ct, tag = frame[:8], frame[8:-TAG_BYTES], frame[-TAG_BYTES:]
    want = hmac.new(mac, direction + session_id(s_k) + ctr + ct, hashlib.sha256).digest()[:TAG_BYTES]
    if not hmac.compare_digest(want, tag):
        raise IntegrityError("echo frame failed authentication")
    return int.from_bytes(ctr, "big"), sym_decrypt(enc, b"ECHO" + direction + ctr, ct)


def build_request(s_k: bytes, counter: int, message: bytes) -> bytes:
    return session_id(s_k) + seal(s_k, U2G, counter, message)
