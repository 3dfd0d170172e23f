"""Short Weierstrass curve arithmetic over prime fields.

Public operations validate their inputs and feed the op counters; the
underscored Jacobian helpers are unchecked and used internally by
:func:`scalar_mul`.
"""

from __future__ import annotations

import configparser
import random
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

from . import trace


class InvalidPoint(ValueError):
    pass


class InvalidScalar(ValueError):
    pass


@dataclass(frozen=True)
class CurvePoint:
    """Affine point; ``x is None`` marks the identity."""

    x: Optional[int]
    y: Optional[int]

    @property
    def is_identity(self) -> bool:
        return self.x is None

    def __repr__(self) -> str:
        if self.is_identity:
            return "CurvePoint(identity)"
        return f"CurvePoint(x={self.x:#x}, y={self.y:#x})"


IDENTITY = CurvePoint(None, None)


@dataclass(frozen=True)
class CurveParams:
    profile_id: str
    code: int
    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int

    def __post_init__(self):
        if (4 * self.a**3 + 27 * self.b**2) % self.p == 0:
            raise ValueError(f"{self.profile_id}: singular curve")
        if not self.contains(self.G):
            raise ValueError(f"{self.profile_id}: generator not on curve")

    @property
    def G(self) -> CurvePoint:
        return CurvePoint(self.gx, self.gy)

    def contains(self, P: CurvePoint) -> bool:
        if P.is_identity:
            return True
        x, y = P.x, P.y
        if not (0 <= x < self.p and 0 <= y < self.p):
            return False
        return (y * y - (x * x * x + self.a * x + self.b)) % self.p == 0


def _load_constants() -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    cfg.read_string(resources.files("ugw").joinpath("profiles.ini").read_text())
    return cfg


CONSTANTS = _load_constants()
COORD_BYTES = CONSTANTS.getint("encoding", "coordinate_bytes")
POINT_BYTES = 2 * COORD_BYTES


@lru_cache(maxsize=None)
def get_profile(profile_id: str) -> CurveParams:
    if profile_id == "encoding" or not CONSTANTS.has_section(profile_id):
        raise KeyError(f"unknown curve profile {profile_id!r}")
    sec = CONSTANTS[profile_id]
    return CurveParams(
        profile_id=profile_id,
        code=int(sec["code"]),
        **{k: int(sec[k], 16) for k in ("p", "a", "b", "gx", "gy", "n")},
    )


def profile_by_code(code: int) -> CurveParams:
    for name in CONSTANTS.sections():
        if name != "encoding" and int(CONSTANTS[name]["code"]) == code:
            return get_profile(name)
    raise KeyError(f"unknown curve profile code {code}")


PAPER160 = get_profile("paper160")
TINY97 = get_profile("tiny97")


def _check(P: CurvePoint, params: CurveParams) -> None:
    if not params.contains(P):
        raise InvalidPoint(f"point not on {params.profile_id}: {P!r}")


def negate(P: CurvePoint, params: CurveParams) -> CurvePoint:
    if P.is_identity:
        return P
    return CurvePoint(P.x, (-P.y) % params.p)


def point_add(P: CurvePoint, Q: CurvePoint, params: CurveParams) -> CurvePoint:
    _check(P, params)
    _check(Q, params)
    trace.record("point_add")
    return _affine_add(P, Q, params)


def _affine_add(P: CurvePoint, Q: CurvePoint, params: CurveParams) -> CurvePoint:
    if P.is_identity:
        return Q
    if Q.is_identity:
        return P
    p = params.p
    if P.x == Q.x:
        if (P.y + Q.y) % p == 0:
            return IDENTITY
        lam = (3 * P.x * P.x + params.a) * pow(2 * P.y, -1, p) % p
    else:
        lam = (Q.y - P.y) * pow(Q.x - P.x, -1, p) % p
    x3 = (lam * lam - P.x - Q.x) % p
    return CurvePoint(x3, (lam * (P.x - x3) - P.y) % p)


# Jacobian coordinates (X, Y, Z) with x = X/Z^2, y = Y/Z^3; Z == 0 is the identity.

def _jdouble(P, a, p):
    X1, Y1, Z1 = P
    if Z1 == 0 or Y1 == 0:
        return (1, 1, 0)
    YY = Y1 * Y1 % p
    S = 4 * X1 * YY % p
    ZZ = Z1 * Z1 % p
    M = (3 * X1 * X1 + a * ZZ * ZZ) % p
    X3 = (M * M - 2 * S) % p
    Y3 = (M * (S - X3) - 8 * YY * YY) % p
    Z3 = 2 * Y1 * Z1 % p
    return (X3, Y3, Z3)


def _jadd(P, Q, a, p):
    X1, Y1, Z1 = P
    X2, Y2, Z2 = Q
    if Z1 == 0:
        return Q
    if Z2 == 0:
        return P
    Z1Z1 = Z1 * Z1 % p
    Z2Z2 = Z2 * Z2 % p
    U1 = X1 * Z2Z2 % p
    U2 = X2 * Z1Z1 % p
    S1 = Y1 * Z2 * Z2Z2 % p
    S2 = Y2 * Z1 * Z1Z1 % p
    if U1 == U2:
        if S1 != S2:
            return (1, 1, 0)
        return _jdouble(P, a, p)
    H = U2 - U1
    R = S2 - S1
    HH = H * H % p
    HHH = H * HH % p
    V = U1 * HH % p
    X3 = (R * R - HHH - 2 * V) % p
    Y3 = (R * (V - X3) - S1 * HHH) % p
    Z3 = H * Z1 * Z2 % p
    return (X3, Y3, Z3)


def _to_affine(P, p) -> CurvePoint:
    X, Y, Z = P
    if Z == 0:
        return IDENTITY
    zinv = pow(Z, -1, p)
    zinv2 = zinv * zinv % p
    return CurvePoint(X * zinv2 % p, Y * zinv2 * zinv % p)


def _ladder(k: int, P: CurvePoint, params: CurveParams) -> CurvePoint:
    # Montgomery ladder over the full bit length of n: one add and one double
    # per bit whatever the bit pattern of k.
    a, p = params.a, params.p
    R0 = (1, 1, 0)
    R1 = (P.x, P.y, 1)
    for i in range(params.n.bit_length() - 1, -1, -1):
        if (k >> i) & 1:
            R0 = _jadd(R0, R1, a, p)
            R1 = _jdouble(R1, a, p)
        else:
            R1 = _jadd(R0, R1, a, p)
            R0 = _jdouble(R0, a, p)
    return _to_affine(R0, p)


def scalar_mul(k: int, P: CurvePoint, params: CurveParams) -> CurvePoint:
    """Return k*P for k in [1, n-1]."""
    if not isinstance(k, int) or not 1 <= k < params.n:
        raise InvalidScalar(f"scalar out of range [1, n-1]: {k!r}")
    _check(P, params)
    trace.record("point_mul")
    if P.is_identity:
        return IDENTITY
    return _ladder(k, P, params)


def random_scalar(rng: random.Random, params: CurveParams) -> int:
    """Uniform draw from [1, n-1]; pass ``secrets.SystemRandom()`` outside tests."""
    return rng.randrange(1, params.n)


def encode_point(P: CurvePoint) -> bytes:
    """Uncompressed big-endian x || y, fixed width for every profile."""
    if P.is_identity:
        raise InvalidPoint("the identity has no encoding")
    return P.x.to_bytes(COORD_BYTES, "big") + P.y.to_bytes(COORD_BYTES, "big")


def decode_point(data: bytes, params: CurveParams) -> CurvePoint:
    if len(data) != POINT_BYTES:
        raise InvalidPoint(f"expected {POINT_BYTES} bytes, got {len(data)}")
    P = CurvePoint(
        int.from_bytes(data[:COORD_BYTES], "big"),
        int.from_bytes(data[COORD_BYTES:], "big"),
    )
    _check(P, params)
    return P
