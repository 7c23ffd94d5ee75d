"""USB-style connectivity: a throttled local pipe carrying multiplexed
logical channels, with host-side port forwarding onto named device
services — the same workflow shape as forwarding ports over a debug bridge.

Mux frame layout (big-endian): u32 channel id | u8 op | u32 len | payload.
The host opens channels toward device services ("rfb" or "cmd"); data then
flows as DATA frames until either side closes.
"""

from __future__ import annotations

import asyncio
import struct

from .errors import BindFailedError, ChannelClosedError, ServiceUnknownError
from .streams import USB_PROFILE, TransportProfile, duplex_pair, throttle

OP_OPEN = 1
OP_OPEN_OK = 2
OP_OPEN_FAIL = 3
OP_DATA = 4
OP_CLOSE = 5

FRAME_HEADER = struct.Struct(">IBI")

SERVICES = ("rfb", "cmd")


class ChannelStream:
    """One logical channel riding a mux endpoint; quacks like a byte stream."""

    def __init__(self, endpoint: "_MuxEndpoint", channel_id: int):
        self._endpoint = endpoint
        self.channel_id = channel_id
        self._inbox: asyncio.Queue[bytes | None] = asyncio.Queue()
        self._buffer = bytearray()
        self._eof = False
        self._closed = False
        self.peername = f"usb-channel-{channel_id}"

    def _deliver(self, data: bytes | None) -> None:
        self._inbox.put_nowait(data)

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
                raise ChannelClosedError("usb channel closed mid-read")
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
        if self._closed:
            raise ChannelClosedError("usb channel is closed")
        await self._endpoint.send_frame(self.channel_id, OP_DATA, bytes(data))

    async def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                await self._endpoint.send_frame(self.channel_id, OP_CLOSE, b"")
            except ChannelClosedError:
                pass
            self._endpoint._channels.pop(self.channel_id, None)
            self._deliver(None)


class _MuxEndpoint:
    """Shared frame pump for one side of the pipe."""

    def __init__(self, stream):
        self._stream = stream
        self._channels: dict[int, ChannelStream] = {}
        self._write_lock = asyncio.Lock()
        self._pump_task: asyncio.Task | None = None

    async def send_frame(self, channel: int, op: int, payload: bytes) -> None:
        async with self._write_lock:
            await self._stream.write(FRAME_HEADER.pack(channel, op, len(payload)) + payload)

    async def _read_frame(self) -> tuple[int, int, bytes]:
        header = await self._stream.read_exactly(FRAME_HEADER.size)
        channel, op, length = FRAME_HEADER.unpack(header)
        payload = await self._stream.read_exactly(length) if length else b""
        return channel, op, payload

    def start(self) -> None:
        if self._pump_task is None:
            self._pump_task = asyncio.ensure_future(self._pump())

    async def _pump(self) -> None:
        try:
            while True:
                channel, op, payload = await self._read_frame()
                await self._handle_frame(channel, op, payload)
        except (ChannelClosedError, asyncio.CancelledError):
            for chan in list(self._channels.values()):
                chan._deliver(None)
            self._channels.clear()

    async def _handle_frame(self, channel: int, op: int, payload: bytes) -> None:
        raise NotImplementedError

    async def shutdown(self) -> None:
        if self._pump_task is not None:
            self._pump_task.cancel()
            try:
                await self._pump_task
            except asyncio.CancelledError:
                pass
        await self._stream.close()


class DeviceEndpoint(_MuxEndpoint):
    """Device side: answers OPEN frames by attaching server handlers."""

    def __init__(self, stream):
        super().__init__(stream)
        self._handlers: dict[str, object] = {}
        self._service_tasks: set[asyncio.Task] = set()

    def attach(self, server) -> None:
        """Expose a server's rfb/cmd handlers as named services."""
        self._handlers = {"rfb": server.handle_rfb, "cmd": server.handle_cmd}
        self.start()

    async def _handle_frame(self, channel: int, op: int, payload: bytes) -> None:
        if op == OP_OPEN:
            service = payload.decode("utf-8", errors="replace")
            handler = self._handlers.get(service)
            if handler is None:
                await self.send_frame(channel, OP_OPEN_FAIL, f"unknown service {service!r}".encode())
                return
            chan = ChannelStream(self, channel)
            self._channels[channel] = chan
            await self.send_frame(channel, OP_OPEN_OK, b"")
            task = asyncio.ensure_future(handler(chan))
            self._service_tasks.add(task)
            task.add_done_callback(self._service_tasks.discard)
        elif op == OP_DATA and channel in self._channels:
            self._channels[channel]._deliver(payload)
        elif op == OP_CLOSE and channel in self._channels:
            self._channels.pop(channel)._deliver(None)


class HostEndpoint(_MuxEndpoint):
    """Host side: opens channels and forwards local TCP ports onto them."""

    def __init__(self, stream):
        super().__init__(stream)
        self._next_channel = 1
        self._open_waiters: dict[int, asyncio.Future] = {}
        self._forward_servers: list[asyncio.AbstractServer] = []

    async def _handle_frame(self, channel: int, op: int, payload: bytes) -> None:
        if op in (OP_OPEN_OK, OP_OPEN_FAIL):
            waiter = self._open_waiters.pop(channel, None)
            if waiter is not None and not waiter.done():
                if op == OP_OPEN_OK:
                    waiter.set_result(None)
                else:
                    waiter.set_exception(ServiceUnknownError(payload.decode(errors="replace")))
        elif op == OP_DATA and channel in self._channels:
            self._channels[channel]._deliver(payload)
        elif op == OP_CLOSE and channel in self._channels:
            self._channels.pop(channel)._deliver(None)

    async def open_channel(self, service: str) -> ChannelStream:
        self.start()
        channel_id = self._next_channel
        self._next_channel += 1
        chan = ChannelStream(self, channel_id)
        self._channels[channel_id] = chan
        waiter: asyncio.Future = asyncio.get_running_loop().create_future()
        self._open_waiters[channel_id] = waiter
        await self.send_frame(channel_id, OP_OPEN, service.encode())
        try:
            await asyncio.wait_for(waiter, timeout=5.0)
        except Exception:
            self._channels.pop(channel_id, None)
            raise
        return chan

    async def forward_port(self, local_port: int, service: str, host: str = "127.0.0.1"):
        """Expose a device service on a local TCP port, debug-bridge style."""
        probe = await self.open_channel(service)  # surfaces SERVICE_UNKNOWN now
        await probe.close()

        async def handle(reader, writer):
            from .streams import TcpStream

            local = TcpStream(reader, writer)
            try:
                channel = await self.open_channel(service)
            except ServiceUnknownError:
                await local.close()
                return
            await _pump_between(local, channel)

        try:
            server = await asyncio.start_server(handle, host, local_port)
        except OSError as exc:
            raise BindFailedError(f"cannot bind {host}:{local_port}: {exc}") from exc
        self._forward_servers.append(server)
        return server

    async def shutdown(self) -> None:
        for server in self._forward_servers:
            server.close()
            await server.wait_closed()
        await super().shutdown()


async def _pump_between(a, b) -> None:
    async def pump(src, dst):
        try:
            while True:
                data = await src.read_some()
                if not data:
                    break
                await dst.write(data)
        except ChannelClosedError:
            pass
        finally:
            await dst.close()

    await asyncio.gather(pump(a, b), pump(b, a))


def usb_pipe_pair(
    profile: TransportProfile = USB_PROFILE, seed: int | None = None
) -> tuple[DeviceEndpoint, HostEndpoint]:
    """A connected (device, host) endpoint pair over a profile-throttled pipe."""
    device_side, host_side = duplex_pair()
    return (
        DeviceEndpoint(throttle(device_side, profile, seed=seed)),
        HostEndpoint(throttle(host_side, profile, seed=None if seed is None else seed + 1)),
    )
