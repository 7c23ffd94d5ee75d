"""Byte-stream abstractions every channel runs over.

A stream is any object with:

    async read_exactly(n) -> bytes     raises ChannelClosedError at EOF
    async read_some() -> bytes         b"" at EOF, else >= 1 byte
    async write(data) -> None
    async close() -> None

Implementations here: asyncio TCP, in-memory duplex pairs, token-bucket
throttling wrappers, capture taps for tests, and a demo-grade AES-CTR
wrapper for the optional whole-channel encryption toggle.
"""

from __future__ import annotations

import asyncio
import random
import time
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import ChannelClosedError


@dataclass(frozen=True)
class TransportProfile:
    """Bandwidth/latency shape of an emulated link."""

    name: str
    bandwidth: int | None  # bytes per second; None = unlimited
    latency_ms: float = 0.0
    jitter_ms: float = 0.0

    def __post_init__(self):
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency and jitter must be non-negative")

    @property
    def is_passthrough(self) -> bool:
        return self.bandwidth is None and self.latency_ms == 0 and self.jitter_ms == 0


USB_PROFILE = TransportProfile("usb", 30 * 1024 * 1024, latency_ms=1.0)
WIFI_PROFILE = TransportProfile("wifi", int(2.5 * 1024 * 1024), latency_ms=5.0, jitter_ms=2.0)
UNLIMITED_PROFILE = TransportProfile("none", None)

PROFILES = {p.name: p for p in (USB_PROFILE, WIFI_PROFILE, UNLIMITED_PROFILE)}

BUCKET_WINDOW_S = 0.1
MAX_SEGMENT = 64 * 1024


class TcpStream:
    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self._reader = reader
        self._writer = writer

    async def read_exactly(self, n: int) -> bytes:
        try:
            return await self._reader.readexactly(n)
        except (asyncio.IncompleteReadError, ConnectionError) as exc:
            raise ChannelClosedError(str(exc)) from exc

    async def read_some(self) -> bytes:
        try:
            return await self._reader.read(65536)
        except ConnectionError:
            return b""

    async def write(self, data: bytes) -> None:
        try:
            self._writer.write(data)
            await self._writer.drain()
        except ConnectionError as exc:
            raise ChannelClosedError(str(exc)) from exc

    async def close(self) -> None:
        try:
            self._writer.close()
            await self._writer.wait_closed()
        except (ConnectionError, asyncio.CancelledError):
            pass

    @property
    def peername(self) -> str:
        peer = self._writer.get_extra_info("peername")
        return f"{peer[0]}:{peer[1]}" if peer else "tcp:?"


class MemoryStream:
    """One endpoint of an in-process duplex byte pipe."""

    def __init__(self):
        self._inbox: asyncio.Queue[bytes | None] = asyncio.Queue()
        self._buffer = bytearray()
        self._eof = False
        self._peer: "MemoryStream | None" = None
        self.peername = "memory"

    async def _fill(self) -> bool:
        if self._eof:
            return False
        chunk = await self._inbox.get()
        if chunk is None:
            self._eof = True
            return False
        self._buffer += chunk
        return True

    async def read_exactly(self, n: int) -> bytes:
        while len(self._buffer) < n:
            if not await self._fill():
                raise ChannelClosedError("stream closed mid-read")
        out = bytes(self._buffer[:n])
        del self._buffer[:n]
        return out

    async def read_some(self) -> bytes:
        if not self._buffer and not await self._fill():
            return b""
        out = bytes(self._buffer)
        self._buffer.clear()
        return out

    async def write(self, data: bytes) -> None:
        peer = self._peer
        if peer is None or peer._closed_for_writes:
            raise ChannelClosedError("peer endpoint is gone")
        peer._inbox.put_nowait(bytes(data))

    _closed_for_writes = False

    async def close(self) -> None:
        if self._peer is not None and not self._closed_for_writes:
            self._closed_for_writes = True
            self._peer._inbox.put_nowait(None)


def duplex_pair() -> tuple[MemoryStream, MemoryStream]:
    a, b = MemoryStream(), MemoryStream()
    a._peer = b
    b._peer = a
    return a, b


class TokenBucket:
    """Sustained-rate limiter with a 100 ms burst window."""

    def __init__(self, rate: float, *, clock=time.monotonic):
        self.rate = rate
        self.capacity = max(1.0, rate * BUCKET_WINDOW_S)
        self.tokens = self.capacity
        self._clock = clock
        self._last = clock()

    def _refill(self) -> None:
        now = self._clock()
        self.tokens = min(self.capacity, self.tokens + (now - self._last) * self.rate)
        self._last = now

    async def acquire(self, amount: float) -> None:
        while True:
            self._refill()
            if self.tokens >= amount:
                self.tokens -= amount
                return
            await asyncio.sleep((amount - self.tokens) / self.rate)


class ThrottledStream:
    """Applies a transport profile to the write side of a stream."""

    def __init__(self, inner, profile: TransportProfile, seed: int | None = None):
        self._inner = inner
        self.profile = profile
        self._bucket = TokenBucket(profile.bandwidth) if profile.bandwidth else None
        self._rng = random.Random(seed)
        self._segment = MAX_SEGMENT
        if self._bucket is not None:
            self._segment = min(MAX_SEGMENT, int(self._bucket.capacity))

    async def read_exactly(self, n: int) -> bytes:
        return await self._inner.read_exactly(n)

    async def read_some(self) -> bytes:
        return await self._inner.read_some()

    async def write(self, data: bytes) -> None:
        for off in range(0, len(data), self._segment):
            segment = data[off : off + self._segment]
            if self._bucket is not None:
                await self._bucket.acquire(len(segment))
            delay = self.profile.latency_ms + self._rng.random() * self.profile.jitter_ms
            if delay > 0:
                await asyncio.sleep(delay / 1000.0)
            await self._inner.write(segment)

    async def close(self) -> None:
        await self._inner.close()

    @property
    def peername(self) -> str:
        return getattr(self._inner, "peername", "?")


def throttle(stream, profile: TransportProfile, seed: int | None = None):
    """Wrap a stream in a profile; unlimited profiles pass through untouched."""
    if profile.is_passthrough:
        return stream
    return ThrottledStream(stream, profile, seed=seed)


class TapStream:
    """Pass-through that records every byte in both directions (test aid)."""

    def __init__(self, inner):
        self._inner = inner
        self.sent = bytearray()
        self.received = bytearray()

    async def read_exactly(self, n: int) -> bytes:
        data = await self._inner.read_exactly(n)
        self.received += data
        return data

    async def read_some(self) -> bytes:
        data = await self._inner.read_some()
        self.received += data
        return data

    async def write(self, data: bytes) -> None:
        self.sent += data
        await self._inner.write(data)

    async def close(self) -> None:
        await self._inner.close()

    @property
    def peername(self) -> str:
        return getattr(self._inner, "peername", "?")


class EncryptedStream:
    """AES-CTR keystream over an inner stream.

    Demo-grade point-to-point privacy for the optional channel-encryption
    toggle; it carries no per-message integrity and is not a substitute for
    a vetted secure transport.
    """

    def __init__(self, inner, send_key: bytes, send_iv: bytes, recv_key: bytes, recv_iv: bytes):
        self._inner = inner
        self._enc = Cipher(algorithms.AES(send_key), modes.CTR(send_iv)).encryptor()
        self._dec = Cipher(algorithms.AES(recv_key), modes.CTR(recv_iv)).decryptor()

    async def read_exactly(self, n: int) -> bytes:
        return self._dec.update(await self._inner.read_exactly(n))

    async def read_some(self) -> bytes:
        data = await self._inner.read_some()
        return self._dec.update(data) if data else b""

    async def write(self, data: bytes) -> None:
        await self._inner.write(self._enc.update(data))

    async def close(self) -> None:
        await self._inner.close()

    @property
    def peername(self) -> str:
        return getattr(self._inner, "peername", "?")
