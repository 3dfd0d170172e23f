"""Persistent user registry.

File layout: ``b"UGWREG1\\n"`` followed by records, each
``len:u16 || uid:20 || registered_at:u64 || status:u8 || crc32:u32`` where
``len`` counts the payload (uid..status) and the CRC covers ``len`` and the
payload.
"""

from __future__ import annotations

import os
import struct
import tempfile
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path

from .errors import IdentityNotAvailable

MAGIC = b"UGWREG1\n"
ACTIVE, REVOKED = "active", "revoked"
_STATUS = {ACTIVE: 0, REVOKED: 1}
_PAYLOAD = struct.Struct(">20sQB")


class RegistryCorrupt(Exception):
    pass


@dataclass(frozen=True)
class UserRecord:
    uid: bytes
    registered_at: int
    status: str = ACTIVE


class Registry:
    """uid -> UserRecord; every mutation goes through one lock."""

    def __init__(self, records=()):
        self._records = {r.uid: r for r in records}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(sorted(self._records.values(), key=lambda r: r.uid))

    def __eq__(self, other):
        return isinstance(other, Registry) and self._records == other._records

    def get(self, uid: bytes):
        return self._records.get(uid)

    def is_active(self, uid: bytes) -> bool:
        rec = self._records.get(uid)
        return rec is not None and rec.status == ACTIVE

    def add(self, uid: bytes, registered_at: int) -> UserRecord:
        with self._lock:
            if uid in self._records:
                raise IdentityNotAvailable()
            rec = self._records[uid] = UserRecord(uid, registered_at)
            return rec

    def revoke(self, uid: bytes) -> None:
        with self._lock:
            rec = self._records[uid]
            self._records[uid] = UserRecord(rec.uid, rec.registered_at, REVOKED)

    def to_bytes(self) -> bytes:
        out = bytearray(MAGIC)
        for rec in self:
            payload = _PAYLOAD.pack(rec.uid, rec.registered_at, _STATUS[rec.status])
            head = struct.pack(">H", len(payload))
            out += head + payload + struct.pack(">I", zlib.crc32(head + payload))
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Registry":
        if not data.startswith(MAGIC):
            raise RegistryCorrupt("bad registry header")
        records, pos = [], len(MAGIC)
        names = {v: k for k, v in _STATUS.items()}
        while pos < len(data):
            if pos + 2 > len(data):
                raise RegistryCorrupt(f"truncated record at offset {pos}")
            (length,) = struct.unpack_from(">H", data, pos)
            end = pos + 2 + length + 4
            if length != _PAYLOAD.size or end > len(data):
                raise RegistryCorrupt(f"bad record length at offset {pos}")
            body = data[pos:pos + 2 + length]
            (crc,) = struct.unpack_from(">I", data, pos + 2 + length)
            if zlib.crc32(body) != crc:
                raise RegistryCorrupt(f"checksum mismatch in record at offset {pos}")
            uid, at, status = _PAYLOAD.unpack(body[2:])
            if status not in names:
                raise RegistryCorrupt(f"unknown status {status} at offset {pos}")
            records.append(UserRecord(uid, at, names[status]))
            pos = end
        if len({r.uid for r in records}) != len(records):
            raise RegistryCorrupt("duplicate uid in registry file")
        return cls(records)


def atomic_write(path, data: bytes, mode: int = 0o600) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.chmod(tmp, mode)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def persist_registry(registry: Registry, path) -> None:
    with registry._lock:
        data = registry.to_bytes()
    atomic_write(path, data, 0o644)


def load_registry(path) -> Registry:
    path = Path(path)
    if not path.exists():
        return Registry()
    return Registry.from_bytes(path.read_bytes())
