"""Service dispatcher: maps command envelopes onto the device simulator.

One dispatcher serves one device.  Mutations ride the device's single
writer lock; every request gets exactly one response with the same
correlation id, errors included.  Unsolicited alert events go out through
the server's per-session fan-out with correlation id 0.
"""

from __future__ import annotations

from .devicesim import CompositeInputEvent, DeviceSimulator, PointerSample
from .envelope import (
    FS_CHUNK,
    FS_PUT_FIRST,
    FS_PUT_MORE,
    OPCODES,
    CommandEnvelope,
    PayloadReader,
    PayloadWriter,
    error_envelope,
)
from .errors import InvalidArgumentError, RemoteFrameError, UnknownOpcodeError


def make_alert_envelope(message: str) -> CommandEnvelope:
    return CommandEnvelope(OPCODES["EVENT_ALERT"], 0, PayloadWriter().string(message).done())


class ServiceDispatcher:
    def __init__(self, device: DeviceSimulator):
        self.device = device
        # (session_id, path) -> staged bytes for chunked uploads
        self._pending_puts: dict[tuple[int, str], bytearray] = {}

    def handle(self, env: CommandEnvelope, session_id: int = 0) -> CommandEnvelope:
        handler = _HANDLERS.get(env.opcode)
        try:
            if handler is None:
                raise UnknownOpcodeError(f"unknown opcode 0x{env.opcode:04X}")
            reader = PayloadReader(env.payload)
            payload = handler(self, reader, session_id)
            reader.finish()
            return CommandEnvelope(env.opcode, env.correlation_id, payload)
        except RemoteFrameError as exc:
            return error_envelope(env.correlation_id, exc)
        except Exception as exc:  # never let a bad payload kill the channel
            return error_envelope(env.correlation_id, RemoteFrameError(str(exc)))

    # --- applications ------------------------------------------------------

    def _app_list(self, req: PayloadReader, session_id: int) -> bytes:
        running_only = req.flag()
        apps = self.device.list_applications(running_only=running_only)
        out = PayloadWriter().u32(len(apps))
        for app in apps:
            out.string(app.package).string(app.name).string(app.version).flag(app.running)
        return out.done()

    def _app_install(self, req: PayloadReader, session_id: int) -> bytes:
        package = req.string()
        version = req.string()
        overwrite = req.flag()
        payload = req.blob()
        record = self.device.install_application(package, version, payload, overwrite=overwrite)
        return (
            PayloadWriter()
            .string(record.package)
            .string(record.name)
            .string(record.version)
            .flag(record.running)
            .done()
        )

    # --- processes -----------------------------------------------------------

    def _proc_list(self, req: PayloadReader, session_id: int) -> bytes:
        procs = self.device.list_processes()
        out = PayloadWriter().u32(len(procs))
        for p in procs:
            out.u32(p.pid).string(p.name).string(p.state).string(p.kind).string(p.package or "")
        return out.done()

    def _proc_kill(self, req: PayloadReader, session_id: int) -> bytes:
        pid = req.u32()
        self.device.kill_process(pid)
        return b""

    # --- shell ------------------------------------------------------------------

    def _shell_exec(self, req: PayloadReader, session_id: int) -> bytes:
        command = req.string()
        exit_code, stdout, stderr = self.device.shell_exec(command)
        return PayloadWriter().i32(exit_code).blob(stdout).blob(stderr).done()

    # --- filesystem ----------------------------------------------------------------

    def _fs_list(self, req: PayloadReader, session_id: int) -> bytes:
        nodes = self.device.fs.list(req.string())
        out = PayloadWriter().u32(len(nodes))
        for node in nodes:
            out.string(node.path).u8(1 if node.kind == "dir" else 0).u64(node.size)
        return out.done()

    def _fs_get(self, req: PayloadReader, session_id: int) -> bytes:
        return PayloadWriter().blob(self.device.fs.get(req.string())).done()

    def _fs_put(self, req: PayloadReader, session_id: int) -> bytes:
        path = req.string()
        flags = req.u8()
        chunk = req.blob()
        if len(chunk) > FS_CHUNK:
            raise InvalidArgumentError(f"chunk of {len(chunk)} bytes exceeds the {FS_CHUNK} cap")
        key = (session_id, path)
        if flags & FS_PUT_FIRST:
            self._pending_puts.pop(key, None)
        staged = self._pending_puts.setdefault(key, bytearray())
        staged += chunk
        if flags & FS_PUT_MORE:
            return b""
        del self._pending_puts[key]
        self.device.fs.put(path, bytes(staged))
        return b""

    def _fs_remove(self, req: PayloadReader, session_id: int) -> bytes:
        path = req.string()
        recursive = req.flag()
        self.device.fs.remove(path, recursive=recursive)
        return b""

    # --- status & sensors --------------------------------------------------------------

    def _status_get(self, req: PayloadReader, session_id: int) -> bytes:
        status = self.device.status()
        out = (
            PayloadWriter()
            .u8(status.battery)
            .u64(status.uptime_s)
            .flag(status.screen_on)
            .string(status.network)
            .u32(len(status.alerts))
        )
        for alert in status.alerts:
            out.string(alert)
        return out.done()

    def _sensor_read(self, req: PayloadReader, session_id: int) -> bytes:
        t_ms, values = self.device.sensor_read(req.string())
        out = PayloadWriter().f64(t_ms).u32(len(values))
        for v in values:
            out.f64(v)
        return out.done()

    # --- firmware ------------------------------------------------------------------------

    def _firmware_stage(self, req: PayloadReader, session_id: int) -> bytes:
        version = req.string()
        image = req.blob()
        instructions = self.device.firmware_stage(image, version)
        out = PayloadWriter().u32(len(instructions))
        for line in instructions:
            out.string(line)
        return out.done()

    # --- composite input ---------------------------------------------------------------------

    def _input_composite(self, req: PayloadReader, session_id: int) -> bytes:
        duration = req.u32()
        ntracks = req.u32()
        tracks = []
        for _ in range(ntracks):
            track_id = req.u32()
            nsamples = req.u32()
            samples = tuple(
                PointerSample(req.u32(), req.u16(), req.u16()) for _ in range(nsamples)
            )
            tracks.append((track_id, samples))
        event = CompositeInputEvent(tracks=tuple(tracks), duration_ms=duration)
        group = self.device.log_composite(event)
        return PayloadWriter().u32(group).done()


_HANDLERS = {
    OPCODES["APP_LIST"]: ServiceDispatcher._app_list,
    OPCODES["APP_INSTALL"]: ServiceDispatcher._app_install,
    OPCODES["PROC_LIST"]: ServiceDispatcher._proc_list,
    OPCODES["PROC_KILL"]: ServiceDispatcher._proc_kill,
    OPCODES["SHELL_EXEC"]: ServiceDispatcher._shell_exec,
    OPCODES["FS_LIST"]: ServiceDispatcher._fs_list,
    OPCODES["FS_GET"]: ServiceDispatcher._fs_get,
    OPCODES["FS_PUT"]: ServiceDispatcher._fs_put,
    OPCODES["FS_REMOVE"]: ServiceDispatcher._fs_remove,
    OPCODES["STATUS_GET"]: ServiceDispatcher._status_get,
    OPCODES["SENSOR_READ"]: ServiceDispatcher._sensor_read,
    OPCODES["FIRMWARE_STAGE"]: ServiceDispatcher._firmware_stage,
    OPCODES["INPUT_COMPOSITE"]: ServiceDispatcher._input_composite,
}
