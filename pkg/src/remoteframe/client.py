"""Headless protocol clients: an RFB viewer core and a command-channel
client.  The benchmark harness, the test suite and the WebSocket bridge's
test jig all drive the server through these.
"""

from __future__ import annotations

import asyncio

import numpy as np

from .auth import CHANNEL_CMD, client_mac_response, encrypted_client_side
from .encodings import CompressionContext, EncodedRect, EncodingId, decode_rect
from .envelope import (
    OPCODES,
    CommandEnvelope,
    PayloadReader,
    PayloadWriter,
    raise_from_error,
    read_envelope,
    write_envelope,
)
from .errors import AuthFailedError, ChannelClosedError, MalformedPayloadError
from .pixels import PixelFormat, Rectangle
from .rfb import (
    client_handshake,
    key_event_message,
    pointer_event_message,
    read_update_message,
    set_encodings_message,
    update_request_message,
)
from .server import CMD_AUTH_FAILED, CMD_AUTH_NONE, CMD_AUTH_OK, CMD_AUTH_SECRET, CMD_GREETING_MAGIC


class RfbClient:
    """Minimal viewer: handshake, negotiation, update pump, input injection."""

    def __init__(self, stream, width: int, height: int, fmt: PixelFormat, name: bytes):
        self.stream = stream
        self.width = width
        self.height = height
        self.format = fmt
        self.name = name
        self.compression = CompressionContext()
        self.mirror = np.zeros((height, width), dtype=np.uint32)

    @classmethod
    async def connect(
        cls, stream, secret: bytes | None = None, *, encrypt: bool = False
    ) -> "RfbClient":
        width, height, fmt, name, stream = await client_handshake(
            stream, secret, encrypt=encrypt
        )
        return cls(stream, width, height, fmt, name)

    def full_area(self) -> Rectangle:
        return Rectangle(0, 0, self.width, self.height)

    async def set_encodings(self, prefs: list[int]) -> None:
        await self.stream.write(set_encodings_message(prefs))

    async def request_update(self, area: Rectangle | None = None, incremental: bool = True) -> None:
        await self.stream.write(update_request_message(area or self.full_area(), incremental))

    async def read_update(self) -> list[EncodedRect]:
        return await read_update_message(self.stream, self.format)

    def apply(self, rects: list[EncodedRect]) -> None:
        """Decode rects in message order into the framebuffer mirror."""
        for enc in rects:
            grid = decode_rect(enc, self.format, self.compression)
            r = enc.rect
            self.mirror[r.y : r.y + r.h, r.x : r.x + r.w] = grid

    async def pointer(self, x: int, y: int, buttons: int) -> None:
        await self.stream.write(pointer_event_message(x, y, buttons))

    async def key(self, keysym: int, down: bool) -> None:
        await self.stream.write(key_event_message(keysym, down))

    async def close(self) -> None:
        await self.stream.close()


class CmdClient:
    """One-outstanding-request command client; unsolicited alert events are
    collected on the side."""

    def __init__(self, stream):
        self.stream = stream
        self.events: list[str] = []
        self._next_corr = 1
        self._used_corr: set[int] = set()

    @classmethod
    async def connect(
        cls, stream, secret: bytes | None = None, *, encrypt: bool = False
    ) -> "CmdClient":
        greeting = await stream.read_exactly(len(CMD_GREETING_MAGIC) + 2)
        if greeting[: len(CMD_GREETING_MAGIC)] != CMD_GREETING_MAGIC:
            raise MalformedPayloadError(f"bad command-channel greeting {greeting!r}")
        auth_mode = greeting[-1]
        nonce = b""
        if auth_mode == CMD_AUTH_SECRET:
            if secret is None:
                raise AuthFailedError("server requires a shared secret")
            nonce = await client_mac_response(stream, secret, CHANNEL_CMD)
            result = (await stream.read_exactly(1))[0]
            if result != CMD_AUTH_OK:
                raise AuthFailedError("command channel authentication failed")
            if encrypt:
                stream = encrypted_client_side(stream, secret, nonce, CHANNEL_CMD)
        elif auth_mode != CMD_AUTH_NONE:
            raise MalformedPayloadError(f"unknown auth mode {auth_mode}")
        return cls(stream)

    async def request(self, opcode_name: str, payload: bytes = b"") -> bytes:
        """Send one request and return the matching response payload.
        Error envelopes re-raise as their local exception classes."""
        corr = self._next_corr
        self._next_corr += 1
        assert corr not in self._used_corr, "correlation id reuse"
        self._used_corr.add(corr)
        await write_envelope(self.stream, CommandEnvelope(OPCODES[opcode_name], corr, payload))
        while True:
            response = await read_envelope(self.stream)
            if response.correlation_id == 0 and response.opcode == OPCODES["EVENT_ALERT"]:
                self.events.append(PayloadReader(response.payload).string())
                continue
            if response.correlation_id != corr:
                raise MalformedPayloadError(
                    f"response correlation {response.correlation_id} != request {corr}"
                )
            if response.opcode == OPCODES["ERROR"]:
                raise_from_error(response.payload)
            return response.payload

    async def drain_events(self, timeout: float = 0.5) -> list[str]:
        """Collect unsolicited events while idle (up to timeout)."""
        try:
            while True:
                env = await asyncio.wait_for(read_envelope(self.stream), timeout)
                if env.opcode == OPCODES["EVENT_ALERT"] and env.correlation_id == 0:
                    self.events.append(PayloadReader(env.payload).string())
                else:
                    raise MalformedPayloadError("unexpected non-event envelope while idle")
        except asyncio.TimeoutError:
            return list(self.events)
        except ChannelClosedError:
            return list(self.events)

    # --- convenience wrappers over the opcode schemas ------------------------

    async def list_applications(self, running_only: bool = False):
        payload = await self.request("APP_LIST", PayloadWriter().flag(running_only).done())
        reader = PayloadReader(payload)
        apps = []
        for _ in range(reader.u32()):
            apps.append(
                {
                    "package": reader.string(),
                    "name": reader.string(),
                    "version": reader.string(),
                    "running": reader.flag(),
                }
            )
        return apps

    async def install_application(
        self, package: str, version: str, blob: bytes, overwrite: bool = False
    ):
        payload = (
            PayloadWriter().string(package).string(version).flag(overwrite).blob(blob).done()
        )
        reader = PayloadReader(await self.request("APP_INSTALL", payload))
        return {
            "package": reader.string(),
            "name": reader.string(),
            "version": reader.string(),
            "running": reader.flag(),
        }

    async def list_processes(self):
        reader = PayloadReader(await self.request("PROC_LIST"))
        procs = []
        for _ in range(reader.u32()):
            procs.append(
                {
                    "pid": reader.u32(),
                    "name": reader.string(),
                    "state": reader.string(),
                    "kind": reader.string(),
                    "package": reader.string() or None,
                }
            )
        return procs

    async def kill_process(self, pid: int) -> None:
        await self.request("PROC_KILL", PayloadWriter().u32(pid).done())

    async def shell_exec(self, command: str) -> tuple[int, bytes, bytes]:
        reader = PayloadReader(await self.request("SHELL_EXEC", PayloadWriter().string(command).done()))
        return reader.i32(), reader.blob(), reader.blob()

    async def fs_list(self, path: str):
        reader = PayloadReader(await self.request("FS_LIST", PayloadWriter().string(path).done()))
        nodes = []
        for _ in range(reader.u32()):
            nodes.append(
                {
                    "path": reader.string(),
                    "kind": "dir" if reader.u8() else "file",
                    "size": reader.u64(),
                }
            )
        return nodes

    async def fs_get(self, path: str) -> bytes:
        reader = PayloadReader(await self.request("FS_GET", PayloadWriter().string(path).done()))
        return reader.blob()

    async def fs_put(self, path: str, data: bytes) -> None:
        from .envelope import FS_CHUNK, FS_PUT_FIRST, FS_PUT_MORE

        offset = 0
        first = True
        while True:
            chunk = data[offset : offset + FS_CHUNK]
            offset += len(chunk)
            more = offset < len(data)
            flags = (FS_PUT_FIRST if first else 0) | (FS_PUT_MORE if more else 0)
            payload = PayloadWriter().string(path).u8(flags).blob(chunk).done()
            await self.request("FS_PUT", payload)
            first = False
            if not more:
                return

    async def fs_remove(self, path: str, recursive: bool = False) -> None:
        await self.request("FS_REMOVE", PayloadWriter().string(path).flag(recursive).done())

    async def status(self):
        reader = PayloadReader(await self.request("STATUS_GET"))
        return {
            "battery": reader.u8(),
            "uptime_s": reader.u64(),
            "screen_on": reader.flag(),
            "network": reader.string(),
            "alerts": [reader.string() for _ in range(reader.u32())],
        }

    async def sensor_read(self, kind: str):
        reader = PayloadReader(await self.request("SENSOR_READ", PayloadWriter().string(kind).done()))
        t_ms = reader.f64()
        return t_ms, tuple(reader.f64() for _ in range(reader.u32()))

    async def firmware_stage(self, version: str, image: bytes) -> list[str]:
        payload = PayloadWriter().string(version).blob(image).done()
        reader = PayloadReader(await self.request("FIRMWARE_STAGE", payload))
        return [reader.string() for _ in range(reader.u32())]

    async def composite_input(self, tracks, duration_ms: int) -> int:
        writer = PayloadWriter().u32(duration_ms).u32(len(tracks))
        for track_id, samples in tracks:
            writer.u32(track_id).u32(len(samples))
            for t_ms, x, y in samples:
                writer.u32(t_ms).u16(x).u16(y)
        reader = PayloadReader(await self.request("INPUT_COMPOSITE", writer.done()))
        return reader.u32()

    async def close(self) -> None:
        await self.stream.close()


async def open_tcp_stream(host: str, port: int):
    from .streams import TcpStream

    reader, writer = await asyncio.open_connection(host, port)
    return TcpStream(reader, writer)
