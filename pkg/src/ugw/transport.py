"""Publish/subscribe transports: an in-process loopback broker and an MQTT 3.1.1 binding.

Both expose ``subscribe(pattern, callback)``, ``unsubscribe(pattern)``,
``publish(topic, payload)`` and ``close()``; callbacks receive
``(topic, payload)``. Topic filters use MQTT wildcard syntax.

Topic scheme, per gateway id and request kind (setup, reg, auth, echo)::

    <prefix>/<gw-id>/<kind>/req/<client-nonce>
    <prefix>/<gw-id>/<kind>/resp/<client-nonce>

MQTT 3.1.1 has no response-topic property, so the client nonce rides in the
request topic and payloads stay exactly the fixed-width protocol messages.
"""

from __future__ import annotations

import logging
import queue
import secrets
import threading
import time

log = logging.getLogger(__name__)

KINDS = ("setup", "reg", "auth", "echo")


class TransportError(Exception):
    pass


def topic_matches(pattern: str, topic: str) -> bool:
    pat, parts = pattern.split("/"), topic.split("/")
    for i, p in enumerate(pat):
        if p == "#":
            return True
        if i >= len(parts) or (p != "+" and p != parts[i]):
            return False
    return len(pat) == len(parts)


def request_topic(prefix: str, gateway_id: str, kind: str, nonce: str) -> str:
    return f"{prefix}/{gateway_id}/{kind}/req/{nonce}"


def response_topic(prefix: str, gateway_id: str, kind: str, nonce: str) -> str:
    return f"{prefix}/{gateway_id}/{kind}/resp/{nonce}"


def new_nonce() -> str:
    return secrets.token_hex(8)


class LoopbackBroker:
    """Synchronous in-process broker. Every published frame is kept in ``frames``."""

    def __init__(self):
        self._subs = []
        self._lock = threading.Lock()
        self.frames = []

    def subscribe(self, pattern, callback):
        with self._lock:
            self._subs.append((pattern, callback))

    def unsubscribe(self, pattern):
        with self._lock:
            self._subs = [(p, cb) for p, cb in self._subs if p != pattern]

    def publish(self, topic, payload: bytes):
        with self._lock:
            self.frames.append((topic, bytes(payload)))
            targets = [cb for p, cb in self._subs if topic_matches(p, topic)]
        for cb in targets:
            cb(topic, bytes(payload))

    def close(self):
        pass


class MqttTransport:
    """paho-mqtt client wrapper that re-subscribes after every reconnect."""

    def __init__(self, host: str, port: int = 1883, client_id: str = "", keepalive: int = 30,
                 connect_timeout: float = 5.0):
        import paho.mqtt.client as mqtt

        self._mqtt = mqtt
        self.client = mqtt.Client(mqtt.CallbackAPIVersion.VERSION2, client_id=client_id)
        self.client.reconnect_delay_set(min_delay=1, max_delay=30)
        self.client.on_connect = self._on_connect
        self.client.on_message = self._on_message
        self.client.on_subscribe = self._on_subscribe
        self._subs = {}
        self._acks = {}
        self._early_acks = set()
        self._connected = threading.Event()
        self._lock = threading.Lock()
        try:
            self.client.connect(host, port, keepalive)
        except OSError as exc:
            raise TransportError(f"cannot reach broker {host}:{port}: {exc}") from exc
        self.client.loop_start()
        if not self._connected.wait(connect_timeout):
            self.client.loop_stop()
            raise TransportError(f"broker {host}:{port} did not accept the connection")

    def _on_connect(self, client, userdata, flags, reason_code, properties):
        if reason_code.is_failure:
            log.warning("broker refused connection: %s", reason_code)
            return
        with self._lock:
            patterns = list(self._subs)
        for pattern in patterns:
            client.subscribe(pattern, qos=1)
        self._connected.set()

    def _on_subscribe(self, client, userdata, mid, reason_codes, properties):
        with self._lock:
            ev = self._acks.pop(mid, None)
            if ev is None:
                self._early_acks.add(mid)
        if ev is not None:
            ev.set()

    def _on_message(self, client, userdata, msg):
        with self._lock:
            targets = [cb for p, cb in self._subs.items() if topic_matches(p, msg.topic)]
        for cb in targets:
            try:
                cb(msg.topic, msg.payload)
            except Exception:
                log.exception("subscriber callback failed on %s", msg.topic)

    def subscribe(self, pattern, callback, timeout: float = 5.0):
        with self._lock:
            self._subs[pattern] = callback
        ev = threading.Event()
        rc, mid = self.client.subscribe(pattern, qos=1)
        if rc != self._mqtt.MQTT_ERR_SUCCESS:
            raise TransportError(f"subscribe failed ({rc})")
        with self._lock:
            if mid in self._early_acks:
                self._early_acks.discard(mid)
                ev.set()
            else:
                self._acks[mid] = ev
        if not ev.wait(timeout):
            log.debug("no SUBACK for %s within %.1fs", pattern, timeout)

    def unsubscribe(self, pattern):
        with self._lock:
            self._subs.pop(pattern, None)
        self.client.unsubscribe(pattern)

    def publish(self, topic, payload: bytes):
        info = self.client.publish(topic, payload, qos=1)
        if info.rc != self._mqtt.MQTT_ERR_SUCCESS:
            raise TransportError(f"publish to {topic} failed ({info.rc})")

    def close(self):
        self.client.disconnect()
        self.client.loop_stop()


def connect_mqtt_with_backoff(host, port, client_id="", stop: threading.Event = None,
                              max_delay: float = 30.0) -> MqttTransport:
    delay = 1.0
    while True:
        try:
            return MqttTransport(host, port, client_id)
        except TransportError as exc:
            log.warning("%s; retrying in %.0fs", exc, delay)
            if stop is not None and stop.wait(delay):
                raise
            if stop is None:
                time.sleep(delay)
            delay = min(2 * delay, max_delay)


class Channel:
    """Client-side binding of a transport to one gateway and one client nonce.

    Setup and registration must share a nonce (the gateway pairs them by it),
    so a Channel reuses its nonce for every request.
    """

    def __init__(self, transport, gateway_id: str, prefix: str = "ugw", timeout: float = 10.0):
        self.transport = transport
        self.gateway_id = gateway_id
        self.prefix = prefix
        self.timeout = timeout
        self.nonce = new_nonce()

    def request(self, kind: str, payload: bytes) -> bytes:
        box: queue.Queue = queue.Queue(maxsize=1)
        resp = response_topic(self.prefix, self.gateway_id, kind, self.nonce)

        def deliver(topic, data):
            try:
                box.put_nowait(data)
            except queue.Full:
                log.debug("dropping duplicate response on %s", topic)

        self.transport.subscribe(resp, deliver)
        try:
            self.transport.publish(request_topic(self.prefix, self.gateway_id, kind, self.nonce), payload)
            return box.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError(
                f"no {kind} response from gateway {self.gateway_id} within {self.timeout}s"
            ) from None
        finally:
            self.transport.unsubscribe(resp)
