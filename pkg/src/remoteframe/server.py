"""The device-side server: accepts RFB and command-channel clients over any
byte stream (TCP, USB pipe channels, WebSocket bridges) and keeps every
connection isolated — one broken client never disturbs the rest.
"""

from __future__ import annotations

import asyncio
import logging

from .auth import AuthPolicy, CHANNEL_CMD, server_mac_challenge, encrypted_server_side
from .devicesim import DeviceSimulator
from .envelope import PROTOCOL_VERSION as CMD_PROTOCOL_VERSION
from .envelope import read_envelope, write_envelope
from .errors import (
    AuthFailedError,
    BindFailedError,
    ChannelClosedError,
    MalformedPayloadError,
    OutOfBoundsError,
    RemoteFrameError,
    VersionMismatchError,
)
from .rfb import (
    InputEvent,
    SetEncodingsMessage,
    SetPixelFormatMessage,
    UpdateRequestMessage,
    inject_input,
    read_client_message,
    server_handshake,
)
from .services import ServiceDispatcher, make_alert_envelope
from .streams import TcpStream, TransportProfile, UNLIMITED_PROFILE, throttle

log = logging.getLogger(__name__)

CMD_GREETING_MAGIC = b"RFCMD"
CMD_AUTH_NONE = 0
CMD_AUTH_SECRET = 1
CMD_AUTH_OK = 0
CMD_AUTH_FAILED = 1

DEFAULT_RFB_PORT = 5901
DEFAULT_CMD_PORT = 7001


class RemoteFrameServer:
    def __init__(
        self,
        device: DeviceSimulator,
        *,
        auth: AuthPolicy | None = None,
        profile: TransportProfile = UNLIMITED_PROFILE,
        poll_interval_s: float = 0.05,
        defer_empty_updates: bool = True,
        nonce_source=None,
        throttle_seed: int | None = None,
    ):
        self.device = device
        self.dispatcher = ServiceDispatcher(device)
        self.auth = auth or AuthPolicy.open()
        self.profile = profile
        self.poll_interval_s = poll_interval_s
        self.defer_empty_updates = defer_empty_updates
        self.nonce_source = nonce_source
        self.throttle_seed = throttle_seed
        self._tcp_servers: list[asyncio.AbstractServer] = []
        self._conn_tasks: set[asyncio.Task] = set()
        self._next_session_id = 1
        self._event_sinks: dict[int, asyncio.Queue] = {}
        self._loop: asyncio.AbstractEventLoop | None = None
        device.add_alert_listener(self._on_alert)

    # --- alerts ------------------------------------------------------------

    def _on_alert(self, message: str) -> None:
        loop = self._loop
        if loop is None:
            return

        def fan_out() -> None:
            for queue in list(self._event_sinks.values()):
                queue.put_nowait(message)

        if loop.is_running():
            loop.call_soon_threadsafe(fan_out)

    # --- RFB sessions ---------------------------------------------------------

    async def handle_rfb(self, stream) -> None:
        self._loop = asyncio.get_running_loop()
        peer = getattr(stream, "peername", "?")
        try:
            session, stream = await server_handshake(
                stream,
                self.auth,
                self.device.width,
                self.device.height,
                peer=peer,
                nonce_source=self.nonce_source,
                defer_empty_updates=self.defer_empty_updates,
            )
        except (RemoteFrameError, asyncio.TimeoutError, OSError) as exc:
            log.debug("rfb handshake with %s failed: %s", peer, exc)
            await _quiet_close(stream)
            return

        queue: asyncio.Queue = asyncio.Queue()

        async def reader() -> None:
            try:
                while True:
                    queue.put_nowait(await read_client_message(stream))
            except (RemoteFrameError, asyncio.TimeoutError, OSError, ValueError):
                queue.put_nowait(None)

        reader_task = asyncio.ensure_future(reader())
        try:
            while True:
                try:
                    message = await asyncio.wait_for(queue.get(), timeout=self.poll_interval_s)
                except asyncio.TimeoutError:
                    await self._retry_pending(session, stream)
                    continue
                if message is None:
                    break
                if isinstance(message, UpdateRequestMessage):
                    update = session.build_update(
                        self.device.framebuffer(), message.area, message.incremental
                    )
                    if update is None:
                        session.pending_request = (message.area, message.incremental)
                    else:
                        await stream.write(update)
                elif isinstance(message, SetEncodingsMessage):
                    session.set_encodings(message.encodings)
                elif isinstance(message, SetPixelFormatMessage):
                    session.set_pixel_format(message.format)
                elif isinstance(message, InputEvent):
                    inject_input(session, message, self.device)
        except (ChannelClosedError, OutOfBoundsError, MalformedPayloadError, OSError) as exc:
            log.debug("rfb session with %s ended: %s", peer, exc)
        finally:
            reader_task.cancel()
            await _quiet_close(stream)

    async def _retry_pending(self, session, stream) -> None:
        if session.pending_request is None:
            return
        area, incremental = session.pending_request
        update = session.build_update(self.device.framebuffer(), area, incremental)
        if update is not None:
            session.pending_request = None
            await stream.write(update)

    # --- command sessions --------------------------------------------------------

    async def handle_cmd(self, stream) -> None:
        self._loop = asyncio.get_running_loop()
        peer = getattr(stream, "peername", "?")
        secured = self.auth.mode == "shared_secret"
        await stream.write(
            CMD_GREETING_MAGIC
            + bytes([CMD_PROTOCOL_VERSION, CMD_AUTH_SECRET if secured else CMD_AUTH_NONE])
        )
        nonce = b""
        if secured:
            try:
                kwargs = {"nonce_source": self.nonce_source} if self.nonce_source else {}
                ok, nonce = await server_mac_challenge(
                    stream, self.auth.secret, CHANNEL_CMD, **kwargs
                )
            except (RemoteFrameError, asyncio.TimeoutError, OSError):
                await _quiet_close(stream)
                return
            if not ok:
                try:
                    await stream.write(bytes([CMD_AUTH_FAILED]))
                finally:
                    await _quiet_close(stream)
                log.debug("cmd auth from %s failed", peer)
                return
            await stream.write(bytes([CMD_AUTH_OK]))
            if self.auth.encrypt_channel:
                stream = encrypted_server_side(stream, self.auth.secret, nonce, CHANNEL_CMD)

        session_id = self._next_session_id
        self._next_session_id += 1
        events: asyncio.Queue = asyncio.Queue()
        self._event_sinks[session_id] = events
        write_lock = asyncio.Lock()

        async def event_pump() -> None:
            while True:
                message = await events.get()
                async with write_lock:
                    await write_envelope(stream, make_alert_envelope(message))

        pump_task = asyncio.ensure_future(event_pump())
        try:
            while True:
                request = await read_envelope(stream)
                response = self.dispatcher.handle(request, session_id=session_id)
                async with write_lock:
                    await write_envelope(stream, response)
        except (RemoteFrameError, asyncio.TimeoutError, OSError):
            pass
        finally:
            pump_task.cancel()
            self._event_sinks.pop(session_id, None)
            await _quiet_close(stream)

    # --- TCP front end ----------------------------------------------------------------

    async def start_tcp(
        self,
        bind: str = "127.0.0.1",
        rfb_port: int = DEFAULT_RFB_PORT,
        cmd_port: int = DEFAULT_CMD_PORT,
    ) -> None:
        self._loop = asyncio.get_running_loop()

        def acceptor(handler):
            async def on_connect(reader, writer):
                stream = throttle(TcpStream(reader, writer), self.profile, seed=self.throttle_seed)
                task = asyncio.current_task()
                self._conn_tasks.add(task)
                try:
                    await handler(stream)
                finally:
                    self._conn_tasks.discard(task)

            return on_connect

        try:
            self._tcp_servers.append(
                await asyncio.start_server(acceptor(self.handle_rfb), bind, rfb_port)
            )
            self._tcp_servers.append(
                await asyncio.start_server(acceptor(self.handle_cmd), bind, cmd_port)
            )
        except OSError as exc:
            raise BindFailedError(f"cannot bind {bind}:{rfb_port}/{cmd_port}: {exc}") from exc
        log.info("listening on %s: rfb=%d cmd=%d", bind, rfb_port, cmd_port)

    async def shutdown(self) -> None:
        """Close listeners and tear down every live session (within ~1 s)."""
        for server in self._tcp_servers:
            server.close()
        for server in self._tcp_servers:
            await server.wait_closed()
        self._tcp_servers.clear()
        for task in list(self._conn_tasks):
            task.cancel()
        if self._conn_tasks:
            await asyncio.wait(list(self._conn_tasks), timeout=1.0)
        self._conn_tasks.clear()
        self.device.remove_alert_listener(self._on_alert)


async def _quiet_close(stream) -> None:
    try:
        await stream.close()
    except (RemoteFrameError, OSError):
        pass
