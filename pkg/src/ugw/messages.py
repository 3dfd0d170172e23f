"""Fixed-width big-endian wire formats.

Each message is a flat concatenation of its fields in declaration order, with
no tags, lengths or separators. Widths are structural: they do not depend on
the curve profile or the message content.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields
from typing import ClassVar

from .curve import get_profile, profile_by_code
from .errors import MalformedMessage


class Message:
    # (field name, width in bytes); int fields are big-endian unsigned
    LAYOUT: ClassVar[tuple]

    @classmethod
    def size(cls) -> int:
        return sum(width for _, width in cls.LAYOUT)

    @classmethod
    def bit_widths(cls) -> dict:
        return {name: 8 * width for name, width in cls.LAYOUT}

    def to_bytes(self) -> bytes:
        out = bytearray()
        for (name, width), value in zip(self.LAYOUT, astuple(self)):
            if isinstance(value, int):
                out += value.to_bytes(width, "big")
            else:
                if len(value) != width:
                    raise ValueError(f"{type(self).__name__}.{name}: need {width} bytes, got {len(value)}")
                out += value
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes):
        if len(data) != cls.size():
            raise MalformedMessage(f"{cls.__name__}: expected {cls.size()} bytes, got {len(data)}")
        values, pos = [], 0
        kinds = {f.name: f.type for f in fields(cls)}
        for name, width in cls.LAYOUT:
            chunk = bytes(data[pos:pos + width])
            values.append(int.from_bytes(chunk, "big") if kinds[name] in (int, "int") else chunk)
            pos += width
        return cls(*values)


@dataclass(frozen=True)
class RegistrationRequest(Message):
    uid: bytes
    h_i: bytes
    LAYOUT = (("uid", 20), ("h_i", 20))


@dataclass(frozen=True)
class CardIssue(Message):
    """The gateway-framed part of the card: {O_i, MID, X_i}."""

    o_i: bytes
    mid: bytes
    x_i: bytes
    LAYOUT = (("o_i", 20), ("mid", 20), ("x_i", 20))


@dataclass(frozen=True)
class LoginRequest(Message):
    pid: bytes
    t_ki: int
    mid: bytes
    z_login: bytes
    LAYOUT = (("pid", 20), ("t_ki", 4), ("mid", 20), ("z_login", 40))


@dataclass(frozen=True)
class AuthResponse(Message):
    sq_i: bytes
    ns: bytes
    t_k_new: int
    LAYOUT = (("sq_i", 20), ("ns", 16), ("t_k_new", 4))


CARD_MAGIC = b"UGWSC"


@dataclass(frozen=True)
class SmartCard:
    """Issued credential. Everything but z_card sits in confidential memory."""

    o_i: bytes
    mid: bytes
    x_i: bytes
    z_card: bytes
    profile_id: str = "paper160"

    LAYOUT: ClassVar[tuple] = (("o_i", 20), ("mid", 20), ("x_i", 20), ("z_card", 40))
    SECRET_FIELDS: ClassVar[tuple] = ("z_card",)
    FILE_SIZE: ClassVar[int] = len(CARD_MAGIC) + 1 + 100

    def to_bytes(self) -> bytes:
        # header is the magic plus one ASCII profile digit: "UGWSC1" on paper160
        code = get_profile(self.profile_id).code
        body = self.o_i + self.mid + self.x_i + self.z_card
        if len(body) != 100:
            raise ValueError("card fields have wrong widths")
        return CARD_MAGIC + str(code).encode() + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "SmartCard":
        if len(data) != cls.FILE_SIZE or not data.startswith(CARD_MAGIC):
            raise MalformedMessage("not a smart-card file")
        try:
            params = profile_by_code(int(data[5:6].decode()))
        except (KeyError, ValueError, UnicodeDecodeError):
            raise MalformedMessage("unknown curve profile in card header") from None
        body = data[6:]
        return cls(body[:20], body[20:40], body[40:60], body[60:100], params.profile_id)
