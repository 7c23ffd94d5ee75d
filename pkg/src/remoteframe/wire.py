"""Small binary-parsing helpers shared by the protocol layers."""

from __future__ import annotations

import struct

from .errors import TruncatedPayloadError


class ByteCursor:
    """Bounds-checked reader over a byte payload; over-reads raise instead
    of crashing or reading garbage."""

    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise TruncatedPayloadError(
                f"need {n} bytes at offset {self.pos}, only {len(self.data) - self.pos} left"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "big")

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def i32(self) -> int:
        return int.from_bytes(self.take(4), "big", signed=True)

    def f64(self) -> float:
        return struct.unpack(">d", self.take(8))[0]

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def at_end(self) -> bool:
        return self.pos == len(self.data)
