"""Transport-free state transitions for setup, registration, login and password update.

Byte layouts of every hash input (all fields fixed width, no separators;
the password is the only variable-length field and is always bracketed by
fixed-width fields):

    uid        = H("UID" || raw identity)          (canonicalisation, uncounted)
    h_i        = H(D_u || UPW || uid)
    X_i        = H(uid XOR h_i)
    T          = H(S_i || K_gw)
    O_i        = T XOR h_i
    L_i = N_i  = H(D_u || uid)
    PID        = T XOR H(uid || L_i || t_ki)
    S_k        = H(uid || T || n_gw*D_u)
    SQ_i       = H(S_k || n_gw || T || t_k_new)

Points are 40-byte x||y, timestamps 4-byte unix seconds, n_gw 16 bytes.
"""

from __future__ import annotations

import hmac
import random
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Protocol

from . import trace
from .curve import (
    CurveParams,
    CurvePoint,
    InvalidPoint,
    decode_point,
    encode_point,
    random_scalar,
    scalar_mul,
)
from .errors import (
    AuthenticationFailure,
    FreshnessViolation,
    GatewayAuthenticationFailure,
    LocalAuthenticationFailure,
    MalformedRequest,
    UnknownIdentity,
)
from .messages import AuthResponse, CardIssue, LoginRequest, RegistrationRequest, SmartCard
from .symmetric import digest, hash160, hash_to_scalar, kbkdf, sym_decrypt, sym_encrypt, xor

SETUP_LABEL = b"SETUP"
CTX_MID = b"MID"
CTX_ZCARD = b"ZCARD"
CTX_ZLOGIN = b"ZLOGIN"
CTX_NS = b"NS"
NONCE_BYTES = 16


def _ts(t: int) -> bytes:
    return t.to_bytes(4, "big")


@dataclass(frozen=True)
class Identity:
    raw: str

    @cached_property
    def uid(self) -> bytes:
        return digest(b"UID" + self.raw.encode("utf-8"))


def _pw(password: str) -> bytes:
    if not password:
        raise ValueError("password must be non-empty")
    return password.encode("utf-8")


@dataclass
class FreshnessPolicy:
    delta_t: int = 5
    clock: Callable[[], float] = time.time

    def __post_init__(self):
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")

    def now(self) -> int:
        return int(self.clock()) & 0xFFFFFFFF

    def check(self, stamp: int) -> None:
        if abs(self.now() - stamp) > self.delta_t:
            raise FreshnessViolation(f"timestamp {stamp} outside +/-{self.delta_t}s of {self.now()}")


class Registry(Protocol):
    def is_active(self, uid: bytes) -> bool: ...

    def add(self, uid: bytes, registered_at: int) -> None: ...


# -- setup ------------------------------------------------------------------

@dataclass(frozen=True)
class UserSetupPartial:
    params: CurveParams
    ur_i: int
    d_u: CurvePoint


@dataclass(frozen=True)
class UserSetupSecrets:
    params: CurveParams
    ur_i: int
    d_u: CurvePoint
    s_i: CurvePoint
    k_u: bytes = field(repr=False)


@dataclass(frozen=True)
class GatewaySecrets:
    # no D_u field: the gateway discards it once K_gw is derived
    params: CurveParams
    gwr_j: int = field(repr=False)
    s_i: CurvePoint
    k_gw: bytes = field(repr=False)


def setup_user_begin(rng: random.Random, params: CurveParams):
    ur_i = random_scalar(rng, params)
    d_u = scalar_mul(ur_i, params.G, params)
    return UserSetupPartial(params, ur_i, d_u), d_u


def _require_point(P: CurvePoint, params: CurveParams) -> None:
    if P.is_identity or not params.contains(P):
        raise InvalidPoint(f"unusable public point {P!r}")


def setup_gateway_respond(d_u: CurvePoint, rng: random.Random, params: CurveParams):
    _require_point(d_u, params)
    # on a composite-order group gwr_j*D_u can be the identity; redraw
    while True:
        gwr_j = random_scalar(rng, params)
        shared = scalar_mul(gwr_j, d_u, params)
        if not shared.is_identity:
            break
    s_i = scalar_mul(gwr_j, params.G, params)
    k_gw = kbkdf(shared, SETUP_LABEL)
    return GatewaySecrets(params, gwr_j, s_i, k_gw), s_i


def setup_user_finish(partial: UserSetupPartial, s_i: CurvePoint) -> UserSetupSecrets:
    params = partial.params
    _require_point(s_i, params)
    k_u = kbkdf(scalar_mul(partial.ur_i, s_i, params), SETUP_LABEL)
    return UserSetupSecrets(params, partial.ur_i, partial.d_u, s_i, k_u)


def restore_user_secrets(params: CurveParams, ur_i: int, s_i: CurvePoint) -> UserSetupSecrets:
    partial = UserSetupPartial(params, ur_i, scalar_mul(ur_i, params.G, params))
    return setup_user_finish(partial, s_i)


def gateway_t(gw: GatewaySecrets) -> bytes:
    return hash160(encode_point(gw.s_i) + gw.k_gw)


# -- registration -----------------------------------------------------------

def _h_i(d_u: CurvePoint, password: str, uid: bytes) -> bytes:
    return hash160(encode_point(d_u) + _pw(password) + uid)


def register_user_request(identity: Identity, password: str, secrets: UserSetupSecrets) -> RegistrationRequest:
    return RegistrationRequest(identity.uid, _h_i(secrets.d_u, password, identity.uid))


def register_gateway_issue_card(
    req: RegistrationRequest,
    gw: GatewaySecrets,
    registry: Registry,
    now: Optional[int] = None,
) -> CardIssue:
    """Raises IdentityNotAvailable if the uid is taken."""
    registry.add(req.uid, int(time.time()) if now is None else now)
    x_i = hash160(xor(req.uid, req.h_i))
    mid = sym_encrypt(gw.k_gw, CTX_MID, req.uid)
    o_i = xor(gateway_t(gw), req.h_i)
    return CardIssue(o_i, mid, x_i)


def _card_key(password: str, params: CurveParams) -> bytes:
    tk_point = scalar_mul(hash_to_scalar(_pw(password), params), params.G, params)
    return kbkdf(tk_point, CTX_ZCARD)


def register_user_finalize(issue: CardIssue, password: str, secrets: UserSetupSecrets) -> SmartCard:
    params = secrets.params
    z_card = sym_encrypt(_card_key(password, params), CTX_ZCARD, encode_point(secrets.d_u))
    return SmartCard(issue.o_i, issue.mid, issue.x_i, z_card, params.profile_id)


# -- login and authentication ----------------------------------------------

@dataclass(frozen=True)
class LoginPending:
    uid: bytes
    t: bytes = field(repr=False)
    l_i: bytes
    d_u: CurvePoint
    t_ki: int


@dataclass(frozen=True)
class SessionKey:
    s_k: bytes = field(repr=False)
    established_at: int
    peer: bytes

    @property
    def fingerprint(self) -> str:
        return digest(b"FP" + self.s_k).hex()


def open_card(card: SmartCard, identity: Identity, password: str, params: CurveParams):
    """Smart-card reader step: recover D_u and h_i, enforce the X_i gate.

    Returns (d_u, h_i); raises LocalAuthenticationFailure on a wrong password
    or a card that does not belong to ``identity``.
    """
    with trace.section("card"):
        raw = sym_decrypt(_card_key(password, params), CTX_ZCARD, card.z_card)
    try:
        d_u = decode_point(raw, params)
    except InvalidPoint:
        raise LocalAuthenticationFailure("card rejected the password") from None
    uid = identity.uid
    h_i = _h_i(d_u, password, uid)
    if not hmac.compare_digest(hash160(xor(uid, h_i)), card.x_i):
        raise LocalAuthenticationFailure("card rejected the password")
    return d_u, h_i


def login_build_request(
    identity: Identity,
    password: str,
    card: SmartCard,
    secrets: UserSetupSecrets,
    policy: FreshnessPolicy,
):
    params = secrets.params
    d_u, h_i = open_card(card, identity, password, params)
    uid = identity.uid
    t = xor(card.o_i, h_i)
    l_i = hash160(encode_point(d_u) + uid)
    t_ki = policy.now()
    pid = xor(t, hash160(uid + l_i + _ts(t_ki)))
    z_login = sym_encrypt(secrets.k_u, CTX_ZLOGIN, encode_point(d_u))
    return LoginRequest(pid, t_ki, card.mid, z_login), LoginPending(uid, t, l_i, d_u, t_ki)


def _session_secret(uid: bytes, t: bytes, shared: CurvePoint) -> bytes:
    return hash160(uid + t + encode_point(shared))


def _verifier(s_k: bytes, nonce: bytes, t: bytes, t_k_new: int) -> bytes:
    return hash160(s_k + nonce + t + _ts(t_k_new))


def gateway_process_login(
    msg: LoginRequest,
    gw: GatewaySecrets,
    registry: Registry,
    policy: FreshnessPolicy,
    rng: random.Random,
):
    """Verify a login request; returns (AuthResponse, SessionKey) or raises.

    Callers facing the network must collapse the distinct exceptions into one
    opaque failure.
    """
    params = gw.params
    policy.check(msg.t_ki)
    uid = sym_decrypt(gw.k_gw, CTX_MID, msg.mid)
    if not registry.is_active(uid):
        raise UnknownIdentity("MID does not decrypt to a registered identity")
    try:
        d_u = decode_point(sym_decrypt(gw.k_gw, CTX_ZLOGIN, msg.z_login), params)
    except InvalidPoint:
        raise MalformedRequest("Z does not decrypt to a curve point") from None
    t = gateway_t(gw)
    n_i = hash160(encode_point(d_u) + uid)
    pid_star = xor(t, hash160(uid + n_i + _ts(msg.t_ki)))
    if not hmac.compare_digest(pid_star, msg.pid):
        raise AuthenticationFailure("PID mismatch")

    while True:
        # redraw if n_gw*D_u degenerates (only possible on a composite-order group)
        n_gw = rng.getrandbits(8 * NONCE_BYTES)
        if n_gw % params.n:
            shared = scalar_mul(n_gw % params.n, d_u, params)
            if not shared.is_identity:
                break
    nonce = n_gw.to_bytes(NONCE_BYTES, "big")
    ns = sym_encrypt(gw.k_gw, CTX_NS, nonce)
    s_k = _session_secret(uid, t, shared)
    t_k_new = policy.now()
    sq_i = _verifier(s_k, nonce, t, t_k_new)
    return AuthResponse(sq_i, ns, t_k_new), SessionKey(s_k, t_k_new, uid)


def user_confirm_session(
    resp: AuthResponse,
    pending: LoginPending,
    secrets: UserSetupSecrets,
    policy: FreshnessPolicy,
) -> SessionKey:
    params = secrets.params
    policy.check(resp.t_k_new)
    nonce = sym_decrypt(secrets.k_u, CTX_NS, resp.ns)
    n_gw = int.from_bytes(nonce, "big") % params.n
    if n_gw == 0:
        raise GatewayAuthenticationFailure("degenerate gateway nonce")
    shared = scalar_mul(n_gw, pending.d_u, params)
    if shared.is_identity:
        raise GatewayAuthenticationFailure("degenerate gateway nonce")
    s_k = _session_secret(pending.uid, pending.t, shared)
    if not hmac.compare_digest(_verifier(s_k, nonce, pending.t, resp.t_k_new), resp.sq_i):
        raise GatewayAuthenticationFailure("SQ_i mismatch")
    return SessionKey(s_k, policy.now(), pending.uid)


# -- password update ------------------------------------------------------

def password_update(
    card: SmartCard,
    identity: Identity,
    pw_old: str,
    pw_new: str,
    params: CurveParams,
) -> SmartCard:
    """Re-key the card to ``pw_new``; MID is untouched and T is preserved."""
    d_u, h_i = open_card(card, identity, pw_old, params)
    uid = identity.uid
    h_new = _h_i(d_u, pw_new, uid)
    o_new = xor(xor(h_i, h_new), card.o_i)
    x_new = hash160(xor(uid, h_new))
    z_new = sym_encrypt(_card_key(pw_new, params), CTX_ZCARD, encode_point(d_u))
    return SmartCard(o_new, card.mid, x_new, z_new, card.profile_id)
