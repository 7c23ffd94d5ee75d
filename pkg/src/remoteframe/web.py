"""Web front end: WebSocket bridges for the two binary protocols, a JSON
management API over the same device services, and the static viewer.

The bridges are byte-transparent: one WebSocket binary message carries one
protocol message server-to-client, and inbound message payloads are
concatenated into the byte stream, so the RFB and command channels behave
exactly as they do over TCP (same auth, same golden transcripts).
"""

from __future__ import annotations

import base64
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .devicesim import CompositeInputEvent, PointerSample
from .errors import (
    DuplicateIdError,
    InvalidArgumentError,
    IsADirectoryError_,
    NotFoundError,
    PathEscapeError,
    QuotaExceededError,
    RemoteFrameError,
    UnknownCommandError,
    UnsupportedSensorError,
    ChannelClosedError,
)
from .server import RemoteFrameServer
from .streams import throttle

HTTP_STATUS = {
    NotFoundError: 404,
    UnsupportedSensorError: 404,
    InvalidArgumentError: 400,
    PathEscapeError: 400,
    UnknownCommandError: 400,
    DuplicateIdError: 409,
    IsADirectoryError_: 409,
    QuotaExceededError: 413,
}


def _http_error(exc: RemoteFrameError) -> HTTPException:
    return HTTPException(HTTP_STATUS.get(type(exc), 500), detail=str(exc))


class WebSocketStream:
    """Byte-stream facade over a FastAPI WebSocket."""

    def __init__(self, ws: WebSocket):
        self._ws = ws
        self._buffer = bytearray()
        self.peername = f"ws:{ws.client.host}:{ws.client.port}" if ws.client else "ws:?"

    async def _fill(self) -> None:
        try:
            self._buffer += await self._ws.receive_bytes()
        except (WebSocketDisconnect, RuntimeError, KeyError) as exc:
            raise ChannelClosedError(f"websocket closed: {exc}") from exc

    async def read_exactly(self, n: int) -> bytes:
        while len(self._buffer) < n:
            await self._fill()
        out = bytes(self._buffer[:n])
        del self._buffer[:n]
        return out

    async def read_some(self) -> bytes:
        if not self._buffer:
            try:
                await self._fill()
            except ChannelClosedError:
                return b""
        out = bytes(self._buffer)
        self._buffer.clear()
        return out

    async def write(self, data: bytes) -> None:
        try:
            await self._ws.send_bytes(bytes(data))
        except (WebSocketDisconnect, RuntimeError) as exc:
            raise ChannelClosedError(f"websocket closed: {exc}") from exc

    async def close(self) -> None:
        try:
            await self._ws.close()
        except RuntimeError:
            pass


# --- request/response models -----------------------------------------------


class DeviceInfo(BaseModel):
    name: str
    width: int
    height: int
    scenario_duration_ms: int
    encodings: list[str]
    auth_required: bool


class AppModel(BaseModel):
    package: str
    name: str
    version: str
    running: bool


class InstallRequest(BaseModel):
    package: str
    version: str
    data_b64: str
    overwrite: bool = False


class ProcessModel(BaseModel):
    pid: int
    name: str
    state: str
    kind: str
    package: str | None = None


class ShellRequest(BaseModel):
    command: str


class ShellResult(BaseModel):
    exit_code: int
    stdout: str
    stderr: str


class FsNodeModel(BaseModel):
    path: str
    kind: str
    size: int


class StatusModel(BaseModel):
    battery: int
    uptime_s: int
    screen_on: bool
    network: str
    alerts: list[str]


class SensorModel(BaseModel):
    kind: str
    t_ms: float
    values: list[float]


class FirmwareRequest(BaseModel):
    version: str
    data_b64: str


class FirmwareResult(BaseModel):
    staged_path: str
    instructions: list[str]


class InputLogEntryModel(BaseModel):
    seq: int
    t_ms: float
    kind: str
    x: int
    y: int
    buttons: int
    keysym: int
    down: bool
    clamped: bool
    group_id: int
    track_id: int


class TrackModel(BaseModel):
    track_id: int
    samples: list[tuple[int, int, int]] = Field(description="(t_ms, x, y) triples")


class CompositeRequest(BaseModel):
    duration_ms: int
    tracks: list[TrackModel]


class CompositeResult(BaseModel):
    group_id: int


MISSING_VIEWER_PAGE = """<!doctype html>
<html><body style="font-family: sans-serif">
<h1>remoteframe viewer</h1>
<p>The viewer bundle is not built. Run <code>npm install && npm run build</code>
inside <code>frontend/</code>, then restart with <code>--web</code>.</p>
</body></html>"""


def create_app(server: RemoteFrameServer, viewer_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="remoteframe", version="0.1.0")
    app.state.server = server
    device = server.device

    # --- WebSocket bridges --------------------------------------------------

    @app.websocket("/ws/rfb")
    async def ws_rfb(ws: WebSocket):
        await ws.accept()
        await server.handle_rfb(throttle(WebSocketStream(ws), server.profile, seed=server.throttle_seed))

    @app.websocket("/ws/cmd")
    async def ws_cmd(ws: WebSocket):
        await ws.accept()
        await server.handle_cmd(throttle(WebSocketStream(ws), server.profile, seed=server.throttle_seed))

    # --- management API -------------------------------------------------------

    @app.get("/api/info", response_model=DeviceInfo)
    def info():
        return DeviceInfo(
            name="remoteframe-sim",
            width=device.width,
            height=device.height,
            scenario_duration_ms=device.script.total_duration_ms,
            encodings=["raw", "rre", "corre", "hextile", "zlib", "tight"],
            auth_required=server.auth.mode != "none",
        )

    @app.get("/api/status", response_model=StatusModel)
    def status():
        report = device.status()
        return StatusModel(
            battery=report.battery,
            uptime_s=report.uptime_s,
            screen_on=report.screen_on,
            network=report.network,
            alerts=list(report.alerts),
        )

    @app.get("/api/apps", response_model=list[AppModel])
    def apps(running: bool = False):
        return [AppModel(**vars(a)) for a in device.list_applications(running_only=running)]

    @app.post("/api/apps/install", response_model=AppModel)
    def install(request: InstallRequest):
        try:
            record = device.install_application(
                request.package,
                request.version,
                base64.b64decode(request.data_b64),
                overwrite=request.overwrite,
            )
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc
        return AppModel(**vars(record))

    @app.get("/api/processes", response_model=list[ProcessModel])
    def processes():
        return [ProcessModel(**vars(p)) for p in device.list_processes()]

    @app.post("/api/processes/{pid}/kill")
    def kill(pid: int):
        try:
            device.kill_process(pid)
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc
        return {"killed": pid}

    @app.post("/api/shell", response_model=ShellResult)
    def shell(request: ShellRequest):
        try:
            code, out, err = device.shell_exec(request.command)
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc
        return ShellResult(
            exit_code=code,
            stdout=out.decode("utf-8", errors="replace"),
            stderr=err.decode("utf-8", errors="replace"),
        )

    @app.get("/api/fs", response_model=list[FsNodeModel])
    def fs_list(path: str = "/"):
        try:
            return [FsNodeModel(**vars(n)) for n in device.fs.list(path)]
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc

    @app.get("/api/fs/file")
    def fs_get(path: str):
        try:
            data = device.fs.get(path)
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc
        return Response(content=data, media_type="application/octet-stream")

    @app.put("/api/fs/file")
    async def fs_put(path: str, request: Request):
        data = await request.body()
        try:
            device.fs.put(path, data)
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc
        return {"path": path, "size": len(data)}

    @app.delete("/api/fs/file")
    def fs_remove(path: str, recursive: bool = False):
        try:
            device.fs.remove(path, recursive=recursive)
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc
        return {"removed": path}

    @app.get("/api/sensors/{kind}", response_model=SensorModel)
    def sensor(kind: str):
        try:
            t_ms, values = device.sensor_read(kind)
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc
        return SensorModel(kind=kind, t_ms=t_ms, values=list(values))

    @app.post("/api/firmware", response_model=FirmwareResult)
    def firmware(request: FirmwareRequest):
        try:
            instructions = device.firmware_stage(
                base64.b64decode(request.data_b64), request.version
            )
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc
        return FirmwareResult(
            staged_path=f"/sdcard/update-{request.version}.zip", instructions=instructions
        )

    @app.get("/api/input-log", response_model=list[InputLogEntryModel])
    def input_log(limit: int = 100):
        entries = device.input_log()[-max(limit, 0) :]
        return [InputLogEntryModel(**vars(e)) for e in entries]

    @app.post("/api/input/composite", response_model=CompositeResult)
    def composite(request: CompositeRequest):
        event = CompositeInputEvent(
            tracks=tuple(
                (t.track_id, tuple(PointerSample(*s) for s in t.samples))
                for t in request.tracks
            ),
            duration_ms=request.duration_ms,
        )
        try:
            group = device.log_composite(event)
        except RemoteFrameError as exc:
            raise _http_error(exc) from exc
        return CompositeResult(group_id=group)

    # --- viewer assets ----------------------------------------------------------

    viewer_path = Path(viewer_dir) if viewer_dir else None
    if viewer_path and viewer_path.is_dir():
        app.mount("/viewer", StaticFiles(directory=viewer_path, html=True), name="viewer")
    else:

        @app.get("/viewer", response_class=HTMLResponse)
        def viewer_placeholder():
            return HTMLResponse(MISSING_VIEWER_PAGE, status_code=503)

    @app.get("/", response_class=PlainTextResponse)
    def root():
        return "remoteframe server; see /api/info, /viewer, /ws/rfb, /ws/cmd"

    return app


def default_viewer_dir() -> Path | None:
    """The built frontend bundle, when present next to the package checkout."""
    for candidate in (
        Path(__file__).resolve().parents[2] / "frontend" / "dist",
        Path.cwd() / "frontend" / "dist",
    ):
        if candidate.is_dir():
            return candidate
    return None
