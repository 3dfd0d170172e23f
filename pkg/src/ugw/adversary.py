"""Dolev-Yao attack harness.

A :class:`Testbed` wires one enrolled user to a :class:`~ugw.gateway.Gateway`
through a channel the adversary fully controls. Each ``attack_*`` function
scripts one capability from the threat model and returns an
:class:`AttackOutcome`; ``succeeded`` is True only when the attack achieved
its goal (an accepted forgery, a recovered key, a confirmed password).

Scenario files hold one channel action per line::

    login                 user starts a fresh login (request goes in flight)
    forward               deliver the head in-flight message unchanged
    drop                  discard the head in-flight message
    replay <i>            re-deliver observed message i to its original recipient
    tamper <field> <bit>  flip one bit of a field of the head message, deliver it
    inject <hex>          deliver raw bytes to the gateway login endpoint
    delay <seconds>       advance the shared clock

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import dataclasses
import hmac
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional

from . import echo
from .curve import (
    PAPER160,
    CurveParams,
    InvalidPoint,
    _affine_add,
    decode_point,
    encode_point,
    scalar_mul,
)
from .errors import LocalAuthenticationFailure, MalformedMessage, ProtocolError
from .gateway import FAIL, Gateway, SecretStore
from .messages import AuthResponse, CardIssue, LoginRequest, SmartCard
from .protocol import (
    CTX_MID,
    CTX_NS,
    CTX_ZCARD,
    CTX_ZLOGIN,
    SETUP_LABEL,
    FreshnessPolicy,
    Identity,
    SessionKey,
    login_build_request,
    open_card,
    register_user_finalize,
    register_user_request,
    setup_user_begin,
    setup_user_finish,
    user_confirm_session,
)
from .registry import Registry
from .symmetric import digest, hash_to_scalar, kbkdf, sym_decrypt, sym_encrypt


class ManualClock:
    def __init__(self, t: int = 1_700_000_000):
        self.t = t

    def __call__(self) -> int:
        return self.t

    def advance(self, seconds: float) -> None:
        self.t += int(seconds)


@dataclass
class Frame:
    sender: str  # "user" | "gateway" | "adversary"
    kind: str  # "setup" | "reg" | "auth" | "echo"
    payload: bytes
    phase: str  # "setup" | "registration" | "login"


@dataclass
class AttackOutcome:
    attack_id: str
    name: str
    succeeded: bool
    detail: str
    transcript: List[Frame] = field(default_factory=list, repr=False)
    stats: dict = field(default_factory=dict)
    control: bool = False  # honest arm: success here shows the check is live

    def line(self) -> str:
        if self.control:
            verdict = "control ok" if self.succeeded else "CONTROL FAILED"
        else:
            verdict = "ATTACK SUCCEEDED" if self.succeeded else "attack failed"
        extra = " ".join(f"{k}={v}" for k, v in self.stats.items() if not isinstance(v, (list, dict)))
        return f"{self.attack_id:<4} {self.name:<36} {verdict:<16} {self.detail} {extra}".rstrip()

    def summary(self) -> dict:
        return {"attack_id": self.attack_id, "name": self.name, "succeeded": self.succeeded,
                "control": self.control, "detail": self.detail, "stats": self.stats}


class Testbed:
    """One user enrolled at one gateway, all traffic recorded in ``transcript``."""

    def __init__(self, seed: int = 0, params: CurveParams = PAPER160, identity: str = "alice",
                 password: str = "correct horse battery", delta_t: int = 5):
        self.params = params
        self.rng = random.Random(seed)
        self.clock = ManualClock()
        self.policy = FreshnessPolicy(delta_t, self.clock)
        self.gateway = Gateway(params, Registry(), SecretStore(params), self.policy,
                               random.Random(self.rng.getrandbits(64)))
        self.identity = Identity(identity)
        self.password = password
        self.transcript: List[Frame] = []
        self._enroll()

    def _record(self, sender, kind, payload, phase):
        self.transcript.append(Frame(sender, kind, bytes(payload), phase))

    def _enroll(self):
        partial, d_u = setup_user_begin(self.rng, self.params)
        self._record("user", "setup", encode_point(d_u), "setup")
        reply = self.gateway.handle_setup("tb", encode_point(d_u))
        self._record("gateway", "setup", reply, "setup")
        self.secrets = setup_user_finish(partial, decode_point(reply, self.params))
        req = register_user_request(self.identity, self.password, self.secrets)
        self._record("user", "reg", req.to_bytes(), "registration")
        reply = self.gateway.handle_register("tb", req.to_bytes())
        self._record("gateway", "reg", reply, "registration")
        self.card = register_user_finalize(CardIssue.from_bytes(reply[1:]), self.password, self.secrets)

    @property
    def gw_secrets(self):
        return self.gateway.store.get(self.card.mid)

    def login_frames(self) -> List[Frame]:
        return [f for f in self.transcript if f.phase == "login"]

    def start_login(self, password: Optional[str] = None, card: Optional[SmartCard] = None):
        return login_build_request(self.identity, password or self.password, card or self.card,
                                   self.secrets, self.policy)

    def to_gateway(self, payload: bytes, sender: str = "user") -> bytes:
        self._record(sender, "auth", payload, "login")
        reply = self.gateway.handle_login(payload)
        self._record("gateway", "auth", reply, "login")
        return reply

    def to_user(self, payload: bytes, pending) -> SessionKey:
        if payload == FAIL:
            raise ProtocolError("gateway rejected the login")
        try:
            resp = AuthResponse.from_bytes(payload)
        except MalformedMessage as exc:
            raise ProtocolError(str(exc)) from None
        return user_confirm_session(resp, pending, self.secrets, self.policy)

    def gateway_key(self, s_k: bytes) -> Optional[SessionKey]:
        rec = self.gateway.sessions.get(echo.session_id(s_k))
        return rec.key if rec else None

    def login(self):
        req, pending = self.start_login()
        user_key = self.to_user(self.to_gateway(req.to_bytes()), pending)
        return user_key, self.gateway_key(user_key.s_k)


def flip_bit(data: bytes, bit: int) -> bytes:
    out = bytearray(data)
    out[bit // 8] ^= 0x80 >> (bit % 8)
    return bytes(out)


def tamper_message(msg, field_name: str, bit: int):
    """Flip ``bit`` (MSB-first) of one field of a fixed-width message."""
    widths = dict(type(msg).LAYOUT)
    if field_name not in widths:
        raise ValueError(f"{type(msg).__name__} has no field {field_name!r}")
    if not 0 <= bit < 8 * widths[field_name]:
        raise ValueError(f"bit {bit} outside {field_name}")
    value = getattr(msg, field_name)
    if isinstance(value, int):
        value ^= 1 << (8 * widths[field_name] - 1 - bit)
    else:
        value = flip_bit(value, bit)
    return dataclasses.replace(msg, **{field_name: value})


def _field_bits(cls):
    for name, width in cls.LAYOUT:
        for bit in range(8 * width):
            yield name, bit


# -- honest control -----------------------------------------------------------

def run_honest(seed: int, params: CurveParams = PAPER160):
    """Full setup + registration + login; returns (user key, gateway key, transcript)."""
    tb = Testbed(seed, params)
    user_key, gw_key = tb.login()
    return user_key, gw_key, tb.transcript


# -- F2 replay ----------------------------------------------------------------

def attack_replay(seed: int, delay: int, target: str = "request", params: CurveParams = PAPER160) -> AttackOutcome:
    """Replay a captured LoginRequest to the gateway, or a captured AuthResponse to the user."""
    tb = Testbed(seed, params)
    req, pending = tb.start_login()
    resp_bytes = tb.to_gateway(req.to_bytes())
    tb.to_user(resp_bytes, pending)
    tb.clock.advance(delay)
    if target == "request":
        reply = tb.to_gateway(req.to_bytes(), sender="adversary")
        ok = reply != FAIL
        cause = tb.gateway.failures.most_common(1)[0][0] if not ok else "accepted"
        return AttackOutcome("F2", f"replay login request +{delay}s", ok, cause, tb.transcript)
    if target == "response":
        # user logs in again; adversary drops the real reply and replays the old one
        _, pending2 = tb.start_login()
        try:
            tb.to_user(resp_bytes, pending2)
        except ProtocolError as exc:
            return AttackOutcome("F2", f"replay auth response +{delay}s", False, type(exc).__name__, tb.transcript)
        return AttackOutcome("F2", f"replay auth response +{delay}s", True,
                             "user accepted a stale AuthResponse", tb.transcript)
    raise ValueError(f"unknown replay target {target!r}")


# -- F8 tampering -------------------------------------------------------------

def attack_tamper(seed: int, field_name: str, bit: int, params: CurveParams = PAPER160) -> AttackOutcome:
    tb = Testbed(seed, params)
    req, pending = tb.start_login()
    name = f"tamper {field_name}[{bit}]"
    if field_name in dict(LoginRequest.LAYOUT):
        reply = tb.to_gateway(tamper_message(req, field_name, bit).to_bytes(), sender="adversary")
        ok = reply != FAIL
        return AttackOutcome("F8", name, ok, "gateway accepted" if ok else "gateway rejected", tb.transcript)
    resp = AuthResponse.from_bytes(tb.to_gateway(req.to_bytes()))
    try:
        tb.to_user(tamper_message(resp, field_name, bit).to_bytes(), pending)
    except ProtocolError as exc:
        return AttackOutcome("F8", name, False, f"user rejected ({type(exc).__name__})", tb.transcript)
    return AttackOutcome("F8", name, True, "user accepted tampered response", tb.transcript)


def tamper_sweep(seed: int, params: CurveParams = PAPER160) -> AttackOutcome:
    """Every single-bit flip of a LoginRequest (672) and an AuthResponse (320)."""
    tb = Testbed(seed, params)
    req, pending = tb.start_login()
    accepted_req = [
        (f, b) for f, b in _field_bits(LoginRequest)
        if tb.gateway.handle_login(tamper_message(req, f, b).to_bytes()) != FAIL
    ]
    resp = AuthResponse.from_bytes(tb.to_gateway(req.to_bytes()))
    tb.to_user(resp.to_bytes(), pending)  # honest reply is accepted
    accepted_resp = []
    for f, b in _field_bits(AuthResponse):
        try:
            tb.to_user(tamper_message(resp, f, b).to_bytes(), pending)
            accepted_resp.append((f, b))
        except ProtocolError:
            pass
    n_req, n_resp = 8 * LoginRequest.size(), 8 * AuthResponse.size()
    return AttackOutcome(
        "F8", "exhaustive single-bit tamper", bool(accepted_req or accepted_resp),
        f"accepted {len(accepted_req)}/{n_req} request flips, {len(accepted_resp)}/{n_resp} response flips",
        stats={"request_bits": n_req, "response_bits": n_resp,
               "request_accepted": len(accepted_req), "response_accepted": len(accepted_resp)},
    )


# -- F5 stolen smart card -------------------------------------------------

def attack_stolen_card(seed: int, dictionary: Iterable[str], params: CurveParams = PAPER160,
                       forgeries: int = 0) -> AttackOutcome:
    """Adversary holds the card and the user's device, but not the password.

    Each guess goes through the card reader; any guess that passes is sent
    to the gateway. ``forgeries`` extra attempts use the card bytes alone
    (real MID, fresh timestamp, random PID and Z).
    """
    tb = Testbed(seed, params)
    tried = accepted = local_passes = 0
    hits = []
    for guess in dictionary:
        tried += 1
        try:
            req, _ = tb.start_login(password=guess)
        except LocalAuthenticationFailure:
            continue
        local_passes += 1
        if tb.to_gateway(req.to_bytes(), sender="adversary") != FAIL:
            accepted += 1
            hits.append(guess)
        tb.clock.advance(1)
    rng = random.Random(seed ^ 0x5C)
    forged_ok = 0
    for _ in range(forgeries):
        forged = LoginRequest(rng.randbytes(20), tb.policy.now(), tb.card.mid, rng.randbytes(40))
        if tb.gateway.handle_login(forged.to_bytes()) != FAIL:
            forged_ok += 1
    succeeded = accepted > 0 or forged_ok > 0
    detail = f"{accepted} accepted logins from {tried} guesses, {forged_ok}/{forgeries} forgeries accepted"
    return AttackOutcome("F5", "stolen smart card", succeeded, detail, tb.transcript,
                         {"guesses": tried, "local_passes": local_passes, "accepted": accepted,
                          "forgeries": forgeries, "forgeries_accepted": forged_ok, "hits": hits})


# -- F9/F10 impersonation -------------------------------------------------

def attack_impersonate(seed: int, side: str, attempts: int = 1000, params: CurveParams = PAPER160,
                       control: bool = False) -> AttackOutcome:
    """Forge messages knowing the transcript and the card's confidential fields.

    ``side="user"``: forged LoginRequests to the gateway; ``side="gateway"``:
    forged AuthResponses to the user. ``control=True`` passes the honest
    message through instead, which must be accepted.
    """
    tb = Testbed(seed, params)
    old_req, _ = tb.start_login()
    old_resp = AuthResponse.from_bytes(tb.to_gateway(old_req.to_bytes()))
    tb.clock.advance(1)
    rng = random.Random(seed ^ 0x1F)
    accepted = 0
    if side == "user":
        attack_id = "F9"
        if control:
            req, _ = tb.start_login()
            accepted = int(tb.to_gateway(req.to_bytes()) != FAIL)
        else:
            for i in range(attempts):
                t = tb.policy.now()
                if i == 0:
                    # old MID and Z, fresh timestamp, old PID
                    forged = LoginRequest(old_req.pid, t, old_req.mid, old_req.z_login)
                else:
                    # Z re-encrypted under a guessed key, PID from a guessed T
                    fake_key = rng.randbytes(16)
                    z = sym_encrypt(fake_key, CTX_ZLOGIN, sym_decrypt(fake_key, CTX_ZLOGIN, old_req.z_login))
                    z = z if i % 2 else rng.randbytes(40)
                    forged = LoginRequest(rng.randbytes(20), t, old_req.mid, z)
                if tb.gateway.handle_login(forged.to_bytes()) != FAIL:
                    accepted += 1
    elif side == "gateway":
        attack_id = "F10"
        req, pending = tb.start_login()
        if control:
            try:
                tb.to_user(tb.to_gateway(req.to_bytes()), pending)
                accepted = 1
            except ProtocolError:
                pass
        else:
            for i in range(attempts):
                if i == 0:
                    forged = AuthResponse(old_resp.sq_i, old_resp.ns, tb.policy.now())
                else:
                    forged = AuthResponse(rng.randbytes(20), rng.randbytes(16), tb.policy.now())
                try:
                    tb.to_user(forged.to_bytes(), pending)
                    accepted += 1
                except ProtocolError:
                    pass
    else:
        raise ValueError("side must be 'user' or 'gateway'")
    n = 1 if control else attempts
    name = f"impersonate {side}" + (" (control)" if control else "")
    return AttackOutcome(attack_id, name, accepted > 0, f"{accepted}/{n} accepted", tb.transcript,
                         {"attempts": n, "accepted": accepted}, control=control)


# -- F1 offline password guessing -------------------------------------------

def _card_candidate(card: SmartCard, guess: str, params: CurveParams):
    tk = kbkdf(scalar_mul(hash_to_scalar(guess.encode("utf-8"), params), params.G, params), CTX_ZCARD)
    try:
        return decode_point(sym_decrypt(tk, CTX_ZCARD, card.z_card), params)
    except InvalidPoint:
        return None


def attack_offline_guess(card: SmartCard, identity: Identity, dictionary: Iterable[str],
                         params: CurveParams = PAPER160, transcript: Optional[List[Frame]] = None,
                         true_password: Optional[str] = None) -> AttackOutcome:
    """Verifier-free guessing with the card (and transcript) in hand.

    The only local check available is decrypting z_card and testing the
    result for curve membership, then X_i. ``on_curve`` counts guesses that
    survive the first test (false positives if wrong); ``confirmed`` those
    that also reproduce X_i.
    """
    tried, on_curve, confirmed = 0, 0, []
    for guess in dictionary:
        tried += 1
        if not guess:
            continue
        d_u = _card_candidate(card, guess, params)
        if d_u is None:
            continue
        on_curve += 1
        try:
            open_card(card, identity, guess, params)
        except LocalAuthenticationFailure:
            continue
        confirmed.append(guess)
    false_pos = on_curve - (1 if true_password in confirmed else 0)
    succeeded = true_password is not None and true_password in confirmed
    detail = f"{len(confirmed)} confirmed of {tried} guesses, {false_pos} on-curve false positives"
    return AttackOutcome("F1", "offline password guessing", succeeded, detail, transcript or [],
                         {"guesses": tried, "on_curve": on_curve, "confirmed": len(confirmed),
                          "false_positives": false_pos})


def _as_control(outcome: AttackOutcome) -> AttackOutcome:
    outcome.name += " (control)"
    outcome.control = True
    return outcome


def z_card_false_positive_rate(card: SmartCard, params: CurveParams, trials: int, seed: int = 0) -> int:
    """Decrypt z_card under ``trials`` random keys; count on-curve outcomes."""
    rng = random.Random(seed)
    hits = 0
    for _ in range(trials):
        raw = sym_decrypt(rng.randbytes(16), CTX_ZCARD, card.z_card)
        try:
            decode_point(raw, params)
            hits += 1
        except InvalidPoint:
            pass
    return hits


# -- F4 forward secrecy ---------------------------------------------------

def attack_forward_secrecy(seed: int, params: CurveParams = PAPER160, budget: int = 10**6) -> AttackOutcome:
    """Gateway long-term scalar GWR_j leaks after a session.

    Knowing GWR_j and the public S_i, the adversary must still find D_u
    (hidden in Z under K_gw = KDF(GWR_j*D_u)). It walks D = k*G and
    GWR_j*D = k*S_i for k = 1..budget and tests each candidate key against Z.
    """
    tb = Testbed(seed, params)
    user_key, _ = tb.login()
    req = LoginRequest.from_bytes(tb.login_frames()[0].payload)
    resp = AuthResponse.from_bytes(tb.login_frames()[1].payload)
    s_i = tb.gw_secrets.s_i
    D, C = params.G, s_i
    found = None
    for k in range(1, budget + 1):
        if D.is_identity:
            break
        if not C.is_identity:  # a real shared secret never is
            key = kbkdf(C, SETUP_LABEL)
            if sym_decrypt(key, CTX_ZLOGIN, req.z_login[:20]) == encode_point(D)[:20]:
                found = (k, key, D)
                break
        D, C = _affine_add(D, params.G, params), _affine_add(C, s_i, params)
    stats = {"budget": budget, "candidates": k}
    if found is None:
        return AttackOutcome("F4", "forward secrecy (GWR_j leak)", False,
                             f"D_u not found in {k} candidates", tb.transcript, stats)
    s_k = _recompute_session(found[1], s_i, req, resp, params)
    ok = s_k is not None and hmac.compare_digest(s_k, user_key.s_k)
    return AttackOutcome("F4", "forward secrecy (GWR_j leak)", ok,
                         f"D_u found at k={found[0]}, session key {'recovered' if ok else 'not recovered'}",
                         tb.transcript, stats)


def _recompute_session(k_gw, s_i, req: LoginRequest, resp: AuthResponse, params) -> Optional[bytes]:
    uid = sym_decrypt(k_gw, CTX_MID, req.mid)
    try:
        d_u = decode_point(sym_decrypt(k_gw, CTX_ZLOGIN, req.z_login), params)
    except InvalidPoint:
        return None
    n_gw = int.from_bytes(sym_decrypt(k_gw, CTX_NS, resp.ns), "big") % params.n
    if n_gw == 0:
        return None
    t = digest(encode_point(s_i) + k_gw)
    return digest(uid + t + encode_point(scalar_mul(n_gw, d_u, params)))


def attack_key_disclosure(seed: int, params: CurveParams = PAPER160) -> AttackOutcome:
    """K_gw leaks after a session: every recorded session key follows directly."""
    tb = Testbed(seed, params)
    user_key, _ = tb.login()
    frames = tb.login_frames()
    s_k = _recompute_session(tb.gw_secrets.k_gw, tb.gw_secrets.s_i, LoginRequest.from_bytes(frames[0].payload),
                             AuthResponse.from_bytes(frames[1].payload), params)
    ok = s_k == user_key.s_k
    return AttackOutcome("F4", "forward secrecy (K_gw leak)", ok,
                         "past session key recomputed from transcript + K_gw" if ok else "not recomputed",
                         tb.transcript)


# -- F6 privileged insider ------------------------------------------------

def attack_insider(seed: int, params: CurveParams = PAPER160, attempts: int = 10_000) -> AttackOutcome:
    """Insider reads registry records and the transcript, not the secret store."""
    tb = Testbed(seed, params)
    user_key, _ = tb.login()
    frames = tb.login_frames()
    req, resp = LoginRequest.from_bytes(frames[0].payload), AuthResponse.from_bytes(frames[1].payload)
    uids = {rec.uid for rec in tb.gateway.registry}
    s_i = tb.gw_secrets.s_i
    rng = random.Random(seed ^ 0x6)
    # keys an insider can derive from public material first, then random guesses
    candidates = [kbkdf(s_i, SETUP_LABEL), kbkdf(params.G, SETUP_LABEL), digest(encode_point(s_i))[:16]]
    candidates += [rng.randbytes(16) for _ in range(max(0, attempts - len(candidates)))]
    hits = 0
    for key in candidates:
        if sym_decrypt(key, CTX_MID, req.mid) not in uids:
            continue
        s_k = _recompute_session(key, s_i, req, resp, params)
        if s_k == user_key.s_k:
            hits += 1
    return AttackOutcome("F6", "privileged insider", hits > 0, f"{hits}/{len(candidates)} key guesses worked",
                         tb.transcript, {"attempts": len(candidates), "hits": hits})


# -- F11 denial of service ------------------------------------------------

def attack_flood(seed: int, frames: int = 2000, params: CurveParams = PAPER160) -> AttackOutcome:
    """Malformed and random frames at every endpoint; state must not change."""
    tb = Testbed(seed, params)
    before = list(tb.gateway.registry)
    store_size = len(tb.gateway.store)
    rng = random.Random(seed ^ 0xD05)
    sizes = [0, 1, 39, 40, 41, 83, 84, 85, 200]
    crashed = 0
    for i in range(frames):
        payload = rng.randbytes(rng.choice(sizes))
        kind = ("setup", "reg", "auth", "echo")[i % 4]
        try:
            tb.gateway.handle(kind, f"flood{i}", payload)
        except Exception:
            crashed += 1
    # a flooded setup may leave pending entries, but nothing durable
    changed = list(tb.gateway.registry) != before or len(tb.gateway.store) != store_size
    try:
        user_key, gw_key = tb.login()
        alive = gw_key is not None and gw_key.s_k == user_key.s_k
    except ProtocolError:
        alive = False
    succeeded = crashed > 0 or changed or not alive
    return AttackOutcome("F11", "malformed-frame flood", succeeded,
                         f"{crashed} crashes, state {'changed' if changed else 'unchanged'}, "
                         f"honest login {'ok' if alive else 'FAILED'} after {frames} frames",
                         stats={"frames": frames, "crashes": crashed})


# -- F3 anonymity ---------------------------------------------------------

def attack_anonymity(seed: int, params: CurveParams = PAPER160) -> AttackOutcome:
    """Scan public login frames for the identity and other secrets in the clear."""
    tb = Testbed(seed, params)
    user_key, _ = tb.login()
    tb.clock.advance(1)
    user_key2, _ = tb.login()
    needles = {
        "uid": tb.identity.uid,
        "identity": tb.identity.raw.encode(),
        "password": tb.password.encode(),
        "D_u": encode_point(tb.secrets.d_u),
        "K_gw": tb.gw_secrets.k_gw,
        "S_k": user_key.s_k,
    }
    leaks = sorted({name for f in tb.login_frames() for name, v in needles.items() if v in f.payload})
    mids = {LoginRequest.from_bytes(f.payload).mid for f in tb.login_frames() if f.sender == "user"}
    return AttackOutcome("F3", "identity exposure", bool(leaks),
                         f"leaked: {', '.join(leaks) or 'nothing'}; MID static across sessions: {len(mids) == 1}",
                         tb.transcript, {"linkable_sessions": len(mids) == 1})


# -- scripted channel -----------------------------------------------------

@dataclass(frozen=True)
class Action:
    op: str
    args: tuple = ()


@dataclass
class ChannelScript:
    actions: List[Action]

    OPS = {"login": 0, "forward": 0, "drop": 0, "replay": 1, "tamper": 2, "inject": 1, "delay": 1}

    @classmethod
    def parse(cls, text: str) -> "ChannelScript":
        actions = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            op, *args = line.split()
            if op not in cls.OPS or len(args) != cls.OPS[op]:
                raise ValueError(f"line {lineno}: bad action {line!r}")
            if op == "replay":
                args = [int(args[0])]
            elif op == "tamper":
                args = [args[0], int(args[1])]
            elif op == "inject":
                args = [bytes.fromhex(args[0])]
            elif op == "delay":
                args = [float(args[0])]
            actions.append(Action(op, tuple(args)))
        return cls(actions)

    @classmethod
    def load(cls, path) -> "ChannelScript":
        return cls.parse(Path(path).read_text())


def run_script(script: ChannelScript, seed: int = 0, params: CurveParams = PAPER160) -> AttackOutcome:
    """Execute a channel script; success means a non-honest delivery was accepted."""
    tb = Testbed(seed, params)
    in_flight = []  # (recipient, payload)
    observed = []  # (recipient, payload) in order seen on the wire
    pending = None
    breaches, events = [], []

    def deliver(recipient, payload, honest):
        if recipient == "gateway":
            reply = tb.to_gateway(payload, sender="user" if honest else "adversary")
            accepted = reply != FAIL
            if reply != FAIL:
                in_flight.append(("user", reply))
                observed.append(("user", reply))
        else:
            if pending is None:
                events.append("user has no login in progress")
                return
            try:
                tb.to_user(payload, pending)
                accepted = True
            except ProtocolError as exc:
                accepted = False
                events.append(f"user rejected: {type(exc).__name__}")
        if accepted and not honest:
            breaches.append(f"{recipient} accepted adversarial frame")
        events.append(f"{recipient} {'accepted' if accepted else 'rejected'} {'honest' if honest else 'adversarial'} frame")

    for i, action in enumerate(script.actions):
        if action.op == "login":
            req, pending = tb.start_login()
            in_flight.append(("gateway", req.to_bytes()))
            observed.append(("gateway", req.to_bytes()))
        elif action.op == "delay":
            tb.clock.advance(action.args[0])
        elif action.op == "inject":
            deliver("gateway", action.args[0], honest=False)
        elif action.op == "replay":
            idx = action.args[0]
            if not 0 <= idx < len(observed):
                raise ValueError(f"action {i}: replay index {idx} not yet observed")
            deliver(*observed[idx], honest=False)
        else:
            if not in_flight:
                raise ValueError(f"action {i}: {action.op} with nothing in flight")
            recipient, payload = in_flight.pop(0)
            if action.op == "drop":
                events.append(f"dropped frame for {recipient}")
            elif action.op == "forward":
                deliver(recipient, payload, honest=True)
            elif action.op == "tamper":
                cls = LoginRequest if recipient == "gateway" else AuthResponse
                bad = tamper_message(cls.from_bytes(payload), *action.args).to_bytes()
                deliver(recipient, bad, honest=False)
    detail = "; ".join(breaches) if breaches else "no adversarial frame accepted"
    return AttackOutcome("DY", "scripted channel", bool(breaches), detail, tb.transcript,
                         {"actions": len(script.actions), "events": events})


# -- suite ------------------------------------------------------------------

def wordlist(n: int, seed: int = 0, exclude: Iterable[str] = ()) -> List[str]:
    rng = random.Random(seed)
    skip = set(exclude)
    words = []
    while len(words) < n:
        w = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789") for _ in range(rng.randint(6, 12)))
        if w not in skip:
            words.append(w)
    return words


def run_suite(seed: int = 0, params: CurveParams = PAPER160, quick: bool = False) -> List[AttackOutcome]:
    """Every scripted attack with its control arms, at sizes fit for the CLI."""
    scale = 100 if quick else 1000
    tb = Testbed(seed, params)
    words = wordlist(scale, seed, exclude=[tb.password])
    return [
        attack_offline_guess(tb.card, tb.identity, words, params, true_password=tb.password),
        _as_control(attack_offline_guess(tb.card, tb.identity, words[:10] + [tb.password], params,
                                         true_password=tb.password)),
        attack_replay(seed, 6, "request", params),
        attack_replay(seed, 0, "request", params),
        attack_replay(seed, 6, "response", params),
        attack_replay(seed, 2, "response", params),
        attack_anonymity(seed, params),
        attack_forward_secrecy(seed, params, budget=10**4 if quick else 10**5),
        attack_key_disclosure(seed, params),
        attack_stolen_card(seed, words, params, forgeries=scale),
        _as_control(attack_stolen_card(seed, words[:10] + [tb.password], params)),
        attack_insider(seed, params, attempts=scale),
        tamper_sweep(seed, params),
        attack_impersonate(seed, "user", scale, params),
        attack_impersonate(seed, "gateway", scale, params),
        attack_impersonate(seed, "user", params=params, control=True),
        attack_impersonate(seed, "gateway", params=params, control=True),
        attack_flood(seed, 4 * scale, params),
    ]


# successes that are properties of the scheme itself, reported as findings
KNOWN_FINDINGS = {"forward secrecy (K_gw leak)", "replay auth response +2s"}


def unexpected(outcomes: List[AttackOutcome]) -> List[AttackOutcome]:
    """Attack successes outside the known findings, plus failed control arms."""
    return [o for o in outcomes
            if (o.control and not o.succeeded) or (not o.control and o.succeeded and o.name not in KNOWN_FINDINGS)]


def format_report(outcomes: List[AttackOutcome]) -> str:
    lines = [o.line() for o in outcomes]
    findings = [o for o in outcomes if o.succeeded and o.name in KNOWN_FINDINGS]
    lines.append(f"{len(outcomes)} scenarios, {len(findings)} known findings, "
                 f"{len(unexpected(outcomes))} unexpected results")
    return "\n".join(lines)


def write_summary(outcomes: List[AttackOutcome], path) -> None:
    Path(path).write_text(json.dumps([o.summary() for o in outcomes], indent=2, default=str) + "\n")
