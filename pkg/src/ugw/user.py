"""User-side agent: setup + registration, login, password update and echo over a transport."""

from __future__ import annotations

import itertools
import logging
import secrets as pysecrets
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import echo
from .curve import CurveParams, InvalidPoint, decode_point, encode_point, profile_by_code
from .errors import (
    GatewayAuthenticationFailure,
    IdentityNotAvailable,
    MalformedMessage,
    ProtocolError,
)
from .gateway import FAIL, REG_MALFORMED, REG_NO_SETUP, REG_OK, REG_TAKEN
from .messages import AuthResponse, CardIssue, SmartCard
from .protocol import (
    FreshnessPolicy,
    Identity,
    SessionKey,
    UserSetupSecrets,
    login_build_request,
    register_user_finalize,
    register_user_request,
    restore_user_secrets,
    setup_user_begin,
    setup_user_finish,
    user_confirm_session,
)
from .registry import atomic_write
from .transport import Channel

log = logging.getLogger(__name__)

DEVICE_MAGIC = b"UGWDV"


class RegistrationError(ProtocolError):
    pass


@dataclass
class Session:
    key: SessionKey
    channel: Channel
    _counter: itertools.count = field(default_factory=itertools.count, repr=False)

    @property
    def fingerprint(self) -> str:
        return self.key.fingerprint

    def echo(self, message: bytes) -> bytes:
        counter = next(self._counter)
        reply = self.channel.request("echo", echo.build_request(self.key.s_k, counter, message))
        if reply == FAIL:
            raise GatewayAuthenticationFailure("gateway refused the echo frame")
        got_counter, plain = echo.open_sealed(self.key.s_k, echo.G2U, reply)
        if got_counter != counter:
            raise GatewayAuthenticationFailure("echo reply for a different request")
        return plain


class UserAgent:
    def __init__(self, transport, gateway_id: str, params: CurveParams,
                 policy: FreshnessPolicy = None, rng=None, prefix: str = "ugw", timeout: float = 10.0):
        self.transport = transport
        self.gateway_id = gateway_id
        self.params = params
        self.policy = policy or FreshnessPolicy(5, time.time)
        self.rng = rng or pysecrets.SystemRandom()
        self.prefix = prefix
        self.timeout = timeout

    def _channel(self) -> Channel:
        return Channel(self.transport, self.gateway_id, self.prefix, self.timeout)

    def register(self, identity: Identity, password: str):
        """Setup then registration on one channel; returns (SmartCard, UserSetupSecrets)."""
        if not password:
            raise ValueError("password must be non-empty")
        channel = self._channel()
        partial, d_u = setup_user_begin(self.rng, self.params)
        reply = channel.request("setup", encode_point(d_u))
        try:
            s_i = decode_point(reply, self.params)
        except InvalidPoint:
            raise RegistrationError("gateway refused the setup exchange") from None
        secrets = setup_user_finish(partial, s_i)
        req = register_user_request(identity, password, secrets)
        reply = channel.request("reg", req.to_bytes())
        status = reply[:1]
        if status == bytes([REG_TAKEN]):
            raise IdentityNotAvailable()
        if status == bytes([REG_NO_SETUP]):
            raise RegistrationError("gateway lost the setup state; retry")
        if status == bytes([REG_MALFORMED]) or status != bytes([REG_OK]):
            raise RegistrationError(f"registration failed (status {reply[:1].hex()})")
        issue = CardIssue.from_bytes(reply[1:])
        return register_user_finalize(issue, password, secrets), secrets

    def build_login(self, identity: Identity, password: str, card: SmartCard, secrets: UserSetupSecrets):
        """Local card-reader step; raises LocalAuthenticationFailure without any traffic."""
        return login_build_request(identity, password, card, secrets, self.policy)

    def complete_login(self, request, pending, secrets: UserSetupSecrets) -> Session:
        channel = self._channel()
        reply = channel.request("auth", request.to_bytes())
        if reply == FAIL:
            raise GatewayAuthenticationFailure("gateway rejected the login")
        try:
            resp = AuthResponse.from_bytes(reply)
        except MalformedMessage:
            raise GatewayAuthenticationFailure("malformed gateway response") from None
        key = user_confirm_session(resp, pending, secrets, self.policy)
        return Session(key, channel)

    def login(self, identity: Identity, password: str, card: SmartCard, secrets: UserSetupSecrets) -> Session:
        request, pending = self.build_login(identity, password, card, secrets)
        return self.complete_login(request, pending, secrets)


# Device file: the user's confidential memory {UR_i, S_i}; D_u and K_u are
# re-derived on load.  magic:5 || profile digit:1 || ur_i:20 || s_i:40

def save_device(path, secrets: UserSetupSecrets) -> None:
    data = (DEVICE_MAGIC + str(secrets.params.code).encode()
            + secrets.ur_i.to_bytes(20, "big") + encode_point(secrets.s_i))
    atomic_write(path, data, 0o600)


def load_device(path) -> UserSetupSecrets:
    data = Path(path).read_bytes()
    if len(data) != 66 or not data.startswith(DEVICE_MAGIC):
        raise MalformedMessage(f"{path} is not a device file")
    try:
        params = profile_by_code(int(data[5:6].decode()))
        s_i = decode_point(data[26:66], params)
    except (KeyError, ValueError, InvalidPoint) as exc:
        raise MalformedMessage(f"{path}: {exc}") from None
    ur_i = int.from_bytes(data[6:26], "big")
    if not 1 <= ur_i < params.n:
        raise MalformedMessage(f"{path}: scalar out of range")
    return restore_user_secrets(params, ur_i, s_i)


def save_card(path, card: SmartCard) -> None:
    atomic_write(path, card.to_bytes(), 0o600)


def load_card(path) -> SmartCard:
    return SmartCard.from_bytes(Path(path).read_bytes())
