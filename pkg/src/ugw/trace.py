"""Operation counting hooks for the primitives in :mod:`ugw.curve` and :mod:`ugw.symmetric`.

Counting is off unless a :func:`counting` block is active in the current
context, so the hooks cost one ContextVar lookup on the hot path.
"""

from __future__ import annotations

import contextlib
from collections import Counter
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Iterator, Optional

OPS = ("hash", "point_add", "point_mul", "sym", "kdf", "hash_to_scalar")


@dataclass
class OpTrace:
    """Primitive invocation counts, total and per named section."""

    counts: Counter = field(default_factory=Counter)
    sections: dict = field(default_factory=dict)

    def record(self, op: str, section: Optional[str]) -> None:
        self.counts[op] += 1
        if section is not None:
            self.sections.setdefault(section, Counter())[op] += 1

    def get(self, op: str) -> int:
        return self.counts.get(op, 0)

    def excluding(self, *names: str) -> Counter:
        """Counts with the given sections subtracted out."""
        out = Counter(self.counts)
        for name in names:
            out.subtract(self.sections.get(name, Counter()))
        return +out

    def reset(self) -> None:
        self.counts.clear()
        self.sections.clear()


_active: ContextVar[Optional[OpTrace]] = ContextVar("ugw_trace", default=None)
_section: ContextVar[Optional[str]] = ContextVar("ugw_section", default=None)


def record(op: str) -> None:
    trace = _active.get()
    if trace is not None:
        trace.record(op, _section.get())


@contextlib.contextmanager
def counting() -> Iterator[OpTrace]:
    trace = OpTrace()
    token = _active.set(trace)
    try:
        yield trace
    finally:
        _active.reset(token)


@contextlib.contextmanager
def section(name: str) -> Iterator[None]:
    """Tag every op recorded inside the block with ``name``."""
    token = _section.set(name)
    try:
        yield
    finally:
        _section.reset(token)


@contextlib.contextmanager
def suspended() -> Iterator[None]:
    """Stop counting inside the block (for work outside the measured phase)."""
    token = _active.set(None)
    try:
        yield
    finally:
        _active.reset(token)
