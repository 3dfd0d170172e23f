"""Gateway daemon: registry, secret store, replay cache, sessions and frame handlers.

Frames on the wire are exactly the fixed-width protocol messages. Replies:

* setup: 40-byte S_i, or ``FAIL``
* reg:   ``0x00 || CardIssue`` (61 bytes), or one status byte
  (``REG_TAKEN``, ``REG_MALFORMED``, ``REG_NO_SETUP``)
* auth:  40-byte AuthResponse, or ``FAIL`` for every kind of rejection
* echo:  sealed echo frame, or ``FAIL``
"""

from __future__ import annotations

import configparser
import hashlib
import logging
import os
import queue
import secrets as pysecrets
import signal
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import echo
from .curve import CurveParams, InvalidPoint, decode_point, encode_point, get_profile
from .errors import (
    IdentityNotAvailable,
    IntegrityError,
    MalformedMessage,
    ProtocolError,
    ReplayDetected,
)
from .messages import LoginRequest, RegistrationRequest
from .protocol import (
    FreshnessPolicy,
    GatewaySecrets,
    SessionKey,
    gateway_process_login,
    register_gateway_issue_card,
    setup_gateway_respond,
)
from .registry import Registry, atomic_write, load_registry, persist_registry
from .transport import KINDS, request_topic, response_topic

log = logging.getLogger(__name__)

FAIL = b"\xff"
REG_OK, REG_TAKEN, REG_MALFORMED, REG_NO_SETUP = 0, 1, 2, 3
PENDING_SETUP_TTL = 300
MAX_PENDING_SETUPS = 10_000


@dataclass
class ServiceConfig:
    broker: str = "localhost:1883"
    topic_prefix: str = "ugw"
    gateway_id: str = "gw1"
    profile: str = "paper160"
    delta_t: int = 5
    registry_path: Path = Path("~/.ugw/gateway/registry.bin")
    secrets_path: Path = Path("~/.ugw/gateway/secrets.bin")
    workers: int = 4
    loopback: bool = False

    def __post_init__(self):
        self.registry_path = Path(self.registry_path).expanduser()
        self.secrets_path = Path(self.secrets_path).expanduser()
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        get_profile(self.profile)

    @property
    def broker_host_port(self):
        host, _, port = self.broker.rpartition(":")
        return (host or "localhost"), int(port or 1883)

    @classmethod
    def from_file(cls, path, **overrides) -> "ServiceConfig":
        """Read the ``[gateway]`` section of an INI file; keyword overrides win."""
        cfg = configparser.ConfigParser()
        if not cfg.read(path):
            raise FileNotFoundError(path)
        sec = cfg["gateway"] if cfg.has_section("gateway") else {}
        kwargs = {}
        for key in ("broker", "topic_prefix", "gateway_id", "profile", "registry_path", "secrets_path"):
            if key in sec:
                kwargs[key] = sec[key]
        for key in ("delta_t", "workers"):
            if key in sec:
                kwargs[key] = int(sec[key])
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def check_paths(self) -> None:
        for path in (self.registry_path, self.secrets_path):
            path.parent.mkdir(parents=True, exist_ok=True)
            if not os.access(path.parent, os.W_OK):
                raise PermissionError(f"{path.parent} is not writable")


class SecretStoreError(Exception):
    pass


_STORE_MAGIC = b"UGWSEC1\n"
_RECORD = 20 + 20 + 40 + 16


class SecretStore:
    """MID -> GatewaySecrets, encrypted at rest with a passphrase-derived AES-GCM key."""

    def __init__(self, params: CurveParams, entries=None, salt: Optional[bytes] = None):
        self.params = params
        self._entries = dict(entries or {})
        self.salt = salt or os.urandom(16)
        self._key_cache = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._entries)

    def get(self, mid: bytes) -> Optional[GatewaySecrets]:
        return self._entries.get(mid)

    def put(self, mid: bytes, gw: GatewaySecrets) -> None:
        with self._lock:
            self._entries[mid] = gw

    def _key(self, passphrase: str) -> bytes:
        if passphrase not in self._key_cache:
            self._key_cache[passphrase] = hashlib.scrypt(
                passphrase.encode(), salt=self.salt, n=2**14, r=8, p=1, dklen=32
            )
        return self._key_cache[passphrase]

    def to_bytes(self, passphrase: str) -> bytes:
        with self._lock:
            items = sorted(self._entries.items())
        plain = bytearray([self.params.code])
        for mid, gw in items:
            plain += mid + gw.gwr_j.to_bytes(20, "big") + encode_point(gw.s_i) + gw.k_gw
        nonce = os.urandom(12)
        ct = AESGCM(self._key(passphrase)).encrypt(nonce, bytes(plain), _STORE_MAGIC)
        return _STORE_MAGIC + self.salt + nonce + ct

    def save(self, path, passphrase: str) -> None:
        atomic_write(path, self.to_bytes(passphrase), 0o600)

    @classmethod
    def from_bytes(cls, data: bytes, passphrase: str, params: CurveParams) -> "SecretStore":
        if not data.startswith(_STORE_MAGIC) or len(data) < len(_STORE_MAGIC) + 28:
            raise SecretStoreError("not a gateway secret store")
        pos = len(_STORE_MAGIC)
        salt, nonce, ct = data[pos:pos + 16], data[pos + 16:pos + 28], data[pos + 28:]
        store = cls(params, salt=salt)
        try:
            plain = AESGCM(store._key(passphrase)).decrypt(nonce, ct, _STORE_MAGIC)
        except InvalidTag:
            raise SecretStoreError("wrong passphrase or corrupted secret store") from None
        if plain[0] != params.code:
            raise SecretStoreError(f"secret store was written for another curve profile (code {plain[0]})")
        body = plain[1:]
        if len(body) % _RECORD:
            raise SecretStoreError("secret store has a partial record")
        for off in range(0, len(body), _RECORD):
            rec = body[off:off + _RECORD]
            try:
                s_i = decode_point(rec[40:80], params)
            except InvalidPoint as exc:
                raise SecretStoreError(str(exc)) from None
            store._entries[rec[:20]] = GatewaySecrets(params, int.from_bytes(rec[20:40], "big"), s_i, rec[80:])
        return store

    @classmethod
    def load(cls, path, passphrase: str, params: CurveParams) -> "SecretStore":
        path = Path(path)
        if not path.exists():
            return cls(params)
        return cls.from_bytes(path.read_bytes(), passphrase, params)


class ReplayCache:
    """Recently accepted (uid, t_ki) pairs; entries live for 2*delta_t seconds."""

    def __init__(self, delta_t: int):
        self.ttl = 2 * delta_t
        self._seen = {}
        self._locks = {}
        self._guard = threading.Lock()

    def _lock_for(self, uid):
        with self._guard:
            return self._locks.setdefault(uid, threading.Lock())

    def check_and_add(self, uid: bytes, t_ki: int, now: int) -> None:
        with self._lock_for(uid):
            entries = self._seen.setdefault(uid, {})
            for stamp in [s for s, exp in entries.items() if exp < now]:
                del entries[stamp]
            if t_ki in entries:
                raise ReplayDetected(f"duplicate login timestamp {t_ki}")
            entries[t_ki] = now + self.ttl


@dataclass
class SessionRecord:
    uid: bytes
    key: SessionKey
    t_established: int
    last_counter: int = -1
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class Gateway:
    """Transport-independent request handlers around protocol-core."""

    def __init__(self, params: CurveParams, registry: Registry, store: SecretStore,
                 policy: FreshnessPolicy, rng=None, on_register=None):
        self.params = params
        self.registry = registry
        self.store = store
        self.policy = policy
        self.rng = rng or pysecrets.SystemRandom()
        self.on_register = on_register
        self.replay_cache = ReplayCache(policy.delta_t)
        self.sessions = {}
        self.failures = Counter()
        self.malformed = 0
        self._pending = {}
        self._pending_lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._session_lock = threading.Lock()

    def handle(self, kind: str, nonce: str, payload: bytes) -> bytes:
        if kind == "setup":
            return self.handle_setup(nonce, payload)
        if kind == "reg":
            return self.handle_register(nonce, payload)
        if kind == "auth":
            return self.handle_login(payload)
        if kind == "echo":
            return self.handle_echo(payload)
        raise ValueError(f"unknown request kind {kind!r}")

    def _fail(self, cause: str) -> bytes:
        self.failures[cause] += 1
        return FAIL

    def handle_setup(self, nonce: str, frame: bytes) -> bytes:
        try:
            d_u = decode_point(frame, self.params)
            gw, s_i = setup_gateway_respond(d_u, self.rng, self.params)
        except InvalidPoint as exc:
            self.malformed += 1
            log.info("setup rejected: %s", exc)
            return self._fail("MalformedSetup")
        now = time.monotonic()
        with self._pending_lock:
            for key in [k for k, (_, exp) in self._pending.items() if exp < now]:
                del self._pending[key]
            if len(self._pending) >= MAX_PENDING_SETUPS:
                return self._fail("SetupBacklog")
            self._pending[nonce] = (gw, now + PENDING_SETUP_TTL)
        return encode_point(s_i)

    def handle_register(self, nonce: str, frame: bytes) -> bytes:
        try:
            req = RegistrationRequest.from_bytes(frame)
        except MalformedMessage:
            self.malformed += 1
            return bytes([REG_MALFORMED])
        with self._pending_lock:
            entry = self._pending.get(nonce)
        if entry is None:
            return bytes([REG_NO_SETUP])
        gw = entry[0]
        with self._write_lock:
            try:
                issue = register_gateway_issue_card(req, gw, self.registry, self.policy.now())
            except IdentityNotAvailable:
                log.info("registration refused: identity not available")
                return bytes([REG_TAKEN])
            self.store.put(issue.mid, gw)
            with self._pending_lock:
                self._pending.pop(nonce, None)
            if self.on_register is not None:
                self.on_register()
        log.info("registered user %s", req.uid.hex()[:8])
        return bytes([REG_OK]) + issue.to_bytes()

    def handle_login(self, frame: bytes) -> bytes:
        try:
            msg = LoginRequest.from_bytes(frame)
        except MalformedMessage:
            self.malformed += 1
            return self._fail("MalformedFrame")
        gw = self.store.get(msg.mid)
        if gw is None:
            log.info("login rejected: UnknownIdentity (no secrets for MID)")
            return self._fail("UnknownIdentity")
        try:
            resp, key = gateway_process_login(msg, gw, self.registry, self.policy, self.rng)
            self.replay_cache.check_and_add(key.peer, msg.t_ki, self.policy.now())
        except ProtocolError as exc:
            cause = type(exc).__name__
            log.info("login rejected: %s", cause)
            return self._fail(cause)
        sid = echo.session_id(key.s_k)
        with self._session_lock:
            self.sessions[sid] = SessionRecord(key.peer, key, key.established_at)
        log.info("session established user=%s fingerprint=%s", key.peer.hex()[:8], key.fingerprint)
        return resp.to_bytes()

    def handle_echo(self, frame: bytes) -> bytes:
        sid = frame[:echo.SID_BYTES]
        with self._session_lock:
            rec = self.sessions.get(sid)
        if rec is None:
            return self._fail("NoSession")
        try:
            counter, plain = echo.open_sealed(rec.key.s_k, echo.U2G, frame[echo.SID_BYTES:])
        except (IntegrityError, MalformedMessage) as exc:
            log.info("echo rejected: %s", exc)
            return self._fail("EchoIntegrity")
        with rec.lock:
            if counter <= rec.last_counter:
                return self._fail("EchoReplay")
            rec.last_counter = counter
        return echo.seal(rec.key.s_k, echo.G2U, counter, plain)


class GatewayService:
    """Binds a Gateway to a transport: one subscription per request kind, a
    frame queue, and a pool of worker threads."""

    def __init__(self, config: ServiceConfig, transport, passphrase: Optional[str],
                 rng=None, clock=None):
        self.config = config
        self.transport = transport
        self.passphrase = passphrase
        self.params = get_profile(config.profile)
        if not passphrase:
            raise SecretStoreError("a secret-store passphrase is required (UGW_GATEWAY_SECRET)")
        config.check_paths()
        registry = load_registry(config.registry_path)
        store = SecretStore.load(config.secrets_path, passphrase, self.params)
        policy = FreshnessPolicy(config.delta_t, clock or time.time)
        self.gateway = Gateway(self.params, registry, store, policy, rng, on_register=self.persist)
        self._frames: queue.Queue = queue.Queue()
        self._workers = []
        self._stop = threading.Event()
        self.dropped = 0

    @property
    def registry(self) -> Registry:
        return self.gateway.registry

    def persist(self) -> None:
        persist_registry(self.gateway.registry, self.config.registry_path)
        self.gateway.store.save(self.config.secrets_path, self.passphrase)

    def _pattern(self, kind):
        return request_topic(self.config.topic_prefix, self.config.gateway_id, kind, "+")

    def _on_frame(self, topic, payload):
        self._frames.put((topic, payload))

    def _work(self):
        while True:
            item = self._frames.get()
            if item is None:
                return
            topic, payload = item
            parts = topic.split("/")
            if len(parts) != 5 or parts[2] not in KINDS:
                self.dropped += 1
                continue
            kind, nonce = parts[2], parts[4]
            try:
                reply = self.gateway.handle(kind, nonce, payload)
            except Exception:
                log.exception("handler crashed on %s", topic)
                self.dropped += 1
                reply = FAIL
            self.transport.publish(
                response_topic(self.config.topic_prefix, self.config.gateway_id, kind, nonce), reply
            )

    def start(self) -> "GatewayService":
        for _ in range(max(1, self.config.workers)):
            t = threading.Thread(target=self._work, daemon=True, name="ugw-gateway-worker")
            t.start()
            self._workers.append(t)
        for kind in KINDS:
            self.transport.subscribe(self._pattern(kind), self._on_frame)
        log.info("gateway %s serving %d registered users on profile %s",
                 self.config.gateway_id, len(self.registry), self.params.profile_id)
        return self

    def stop(self) -> None:
        for kind in KINDS:
            self.transport.unsubscribe(self._pattern(kind))
        for _ in self._workers:
            self._frames.put(None)
        for t in self._workers:
            t.join(timeout=5)
        self._workers.clear()
        self.persist()
        self._stop.set()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def serve_forever(self, stop: Optional[threading.Event] = None) -> None:
        """Run until ``stop`` is set or SIGINT/SIGTERM arrives, then persist."""
        stop = stop or threading.Event()
        if threading.current_thread() is threading.main_thread():
            for sig in (signal.SIGINT, signal.SIGTERM):
                signal.signal(sig, lambda *_: stop.set())
        self.start()
        try:
            stop.wait()
        finally:
            self.stop()


def serve(config: ServiceConfig, passphrase: Optional[str], stop: Optional[threading.Event] = None,
          transport=None) -> None:
    """Daemon entry point: connect (with backoff) and serve until shutdown."""
    from .transport import LoopbackBroker, connect_mqtt_with_backoff

    stop = stop or threading.Event()
    if transport is None:
        if config.loopback:
            transport = LoopbackBroker()
        else:
            host, port = config.broker_host_port
            transport = connect_mqtt_with_backoff(host, port, f"ugw-gateway-{config.gateway_id}", stop)
    try:
        GatewayService(config, transport, passphrase).serve_forever(stop)
    finally:
        transport.close()
