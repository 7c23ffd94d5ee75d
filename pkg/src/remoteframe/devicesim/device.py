"""The simulated handset: scripted screen, apps, processes, filesystem,
status, sensors and the input log.

All service mutations go through one lock (single logical writer); the
screen side hands out immutable framebuffer snapshots.
"""

from __future__ import annotations

import json
import shlex
import threading
import time
from dataclasses import dataclass, field, replace
from importlib import resources

from ..errors import (
    DuplicateIdError,
    InvalidArgumentError,
    IsADirectoryError_,
    NotFoundError,
    PathEscapeError,
    QuotaExceededError,
    UnknownCommandError,
    UnsupportedSensorError,
)
from ..pixels import FrameBuffer
from .scenario import ScenarioPlayer, ScenarioScript, benchmark_workload

DEFAULT_FS_QUOTA = 256 * 1024 * 1024

DEFAULT_SENSORS = {
    "accelerometer": [(0, (0.0, 0.0, 9.81))],
    "gps": [(0, (41.3851, 2.1734))],
    "proximity": [(0, (5.0,))],  # centimetres; 5.0 reads as "far"
}

FIRMWARE_INSTRUCTIONS = (
    "power off the device",
    "hold volume-down and power to enter recovery mode",
    "choose 'apply update from sdcard' and select the staged file",
    "reboot when the updater reports success",
)


@dataclass(frozen=True)
class AppRecord:
    package: str
    name: str
    version: str
    running: bool


@dataclass(frozen=True)
class ProcessRecord:
    pid: int
    name: str
    state: str
    kind: str  # "process" | "service"
    package: str | None = None


@dataclass(frozen=True)
class FsNode:
    path: str
    kind: str  # "file" | "dir"
    size: int


@dataclass(frozen=True)
class StatusReport:
    battery: int
    uptime_s: int
    screen_on: bool
    network: str
    alerts: tuple[str, ...]


@dataclass(frozen=True)
class InputLogEntry:
    seq: int
    t_ms: float
    kind: str  # "pointer" | "key"
    x: int = 0
    y: int = 0
    buttons: int = 0
    keysym: int = 0
    down: bool = False
    clamped: bool = False
    group_id: int = 0  # 0 = not part of a composite group
    track_id: int = 0


@dataclass(frozen=True)
class PointerSample:
    t_ms: int
    x: int
    y: int


@dataclass(frozen=True)
class CompositeInputEvent:
    """A grouped multi-track gesture applied atomically to the input log."""

    tracks: tuple[tuple[int, tuple[PointerSample, ...]], ...]
    duration_ms: int

    def validate(self) -> None:
        if not self.tracks:
            raise InvalidArgumentError("composite event needs at least one track")
        if self.duration_ms <= 0:
            raise InvalidArgumentError("composite duration must be positive")
        for track_id, samples in self.tracks:
            if not samples:
                raise InvalidArgumentError(f"track {track_id} has no samples")
            times = [s.t_ms for s in samples]
            if times != sorted(times):
                raise InvalidArgumentError(f"track {track_id} samples are not time-ordered")
            if times[-1] > self.duration_ms or times[0] < 0:
                raise InvalidArgumentError(f"track {track_id} samples fall outside the duration")


def normalize_path(path: str) -> str:
    """Resolve '.' and '..'; anything escaping the root is an error."""
    if not path.startswith("/"):
        path = "/" + path
    stack: list[str] = []
    for part in path.split("/"):
        if part in ("", "."):
            continue
        if part == "..":
            if not stack:
                raise PathEscapeError(f"path {path!r} escapes the filesystem root")
            stack.pop()
        else:
            stack.append(part)
    return "/" + "/".join(stack)


class FsTree:
    """In-memory filesystem with normalized absolute paths."""

    def __init__(self, quota: int = DEFAULT_FS_QUOTA):
        self.quota = quota
        self._files: dict[str, bytes] = {}
        self._dirs: set[str] = {"/"}

    def total_size(self) -> int:
        return sum(len(v) for v in self._files.values())

    def exists(self, path: str) -> bool:
        path = normalize_path(path)
        return path in self._files or path in self._dirs

    def is_dir(self, path: str) -> bool:
        return normalize_path(path) in self._dirs

    def mkdirs(self, path: str) -> None:
        path = normalize_path(path)
        if path in self._files:
            raise IsADirectoryError_(f"{path} exists as a file")
        parts = [p for p in path.split("/") if p]
        current = ""
        for part in parts:
            current += "/" + part
            if current in self._files:
                raise IsADirectoryError_(f"{current} exists as a file")
            self._dirs.add(current)

    def put(self, path: str, data: bytes, append: bool = False) -> None:
        path = normalize_path(path)
        if path == "/" or path in self._dirs:
            raise IsADirectoryError_(f"{path} is a directory")
        parent = path.rsplit("/", 1)[0] or "/"
        self.mkdirs(parent)
        replaced = 0 if append else len(self._files.get(path, b""))
        if self.total_size() - replaced + len(data) > self.quota:
            raise QuotaExceededError(
                f"write of {len(data)} bytes exceeds the {self.quota}-byte quota"
            )
        if append and path in self._files:
            self._files[path] += data
        else:
            self._files[path] = data

    def get(self, path: str) -> bytes:
        path = normalize_path(path)
        if path in self._dirs:
            raise IsADirectoryError_(f"{path} is a directory")
        if path not in self._files:
            raise NotFoundError(f"no such file: {path}")
        return self._files[path]

    def remove(self, path: str, recursive: bool = False) -> None:
        path = normalize_path(path)
        if path == "/":
            raise InvalidArgumentError("refusing to remove the filesystem root")
        if path in self._files:
            del self._files[path]
            return
        if path in self._dirs:
            if not recursive:
                raise IsADirectoryError_(f"{path} is a directory; removal needs the recursive flag")
            prefix = path + "/"
            self._files = {p: v for p, v in self._files.items() if not p.startswith(prefix)}
            self._dirs = {p for p in self._dirs if p != path and not p.startswith(prefix)}
            return
        raise NotFoundError(f"no such path: {path}")

    def node(self, path: str) -> FsNode:
        path = normalize_path(path)
        if path in self._dirs:
            return FsNode(path, "dir", 0)
        if path in self._files:
            return FsNode(path, "file", len(self._files[path]))
        raise NotFoundError(f"no such path: {path}")

    def list(self, path: str) -> list[FsNode]:
        path = normalize_path(path)
        if path in self._files:
            return [self.node(path)]
        if path not in self._dirs:
            raise NotFoundError(f"no such path: {path}")
        prefix = "/" if path == "/" else path + "/"
        children: list[FsNode] = []
        for d in self._dirs:
            if d != "/" and d.startswith(prefix) and "/" not in d[len(prefix) :]:
                children.append(FsNode(d, "dir", 0))
        for f, data in self._files.items():
            if f.startswith(prefix) and "/" not in f[len(prefix) :]:
                children.append(FsNode(f, "file", len(data)))
        return sorted(children, key=lambda n: n.path)


def _load_fixture() -> dict:
    with resources.files("remoteframe.devicesim").joinpath("fixture.json").open() as fh:
        return json.load(fh)


class DeviceSimulator:
    """Deterministic stand-in for the controlled handset."""

    def __init__(
        self,
        script: ScenarioScript | None = None,
        *,
        load_fixture: bool = True,
        clock=None,
        fs_quota: int = DEFAULT_FS_QUOTA,
    ):
        self.script = script or benchmark_workload()
        self.player = ScenarioPlayer(self.script)
        self._clock = clock or _MonotonicClock()
        self._lock = threading.RLock()
        self.apps: dict[str, AppRecord] = {}
        self.processes: dict[int, ProcessRecord] = {}
        self.fs = FsTree(quota=fs_quota)
        self.battery = 80
        self.network = "wifi"
        self.alerts: list[str] = []
        self._alert_listeners: list = []
        self._input_log: list[InputLogEntry] = []
        self._seq = 0
        self._reserved_until = -1.0
        self._next_group = 1
        self._next_pid = 300
        if load_fixture:
            self._apply_fixture(_load_fixture())

    def _apply_fixture(self, fixture: dict) -> None:
        for app in fixture["apps"]:
            self.apps[app["package"]] = AppRecord(**app)
        for proc in fixture["processes"]:
            self.processes[proc["pid"]] = ProcessRecord(**proc)
        for d in fixture["filesystem"]["dirs"]:
            self.fs.mkdirs(d)
        for path, content in fixture["filesystem"]["files"].items():
            self.fs.put(path, content.encode())
        self.battery = fixture["status"]["battery"]
        self.network = fixture["status"]["network"]

    # --- clock & screen -------------------------------------------------

    def now_ms(self) -> float:
        return self._clock()

    def framebuffer(self) -> FrameBuffer:
        """Immutable snapshot of the screen at the device clock's time."""
        with self._lock:
            return self.player.advance(int(self.now_ms()))

    @property
    def width(self) -> int:
        return self.script.width

    @property
    def height(self) -> int:
        return self.script.height

    # --- input log -------------------------------------------------------

    def _stamp(self, at: float | None = None) -> float:
        t = self.now_ms() if at is None else at
        t = max(t, self._reserved_until)
        self._reserved_until = t
        return t

    def _append(self, entry_kwargs: dict, at: float | None = None) -> InputLogEntry:
        entry = InputLogEntry(seq=self._seq, t_ms=self._stamp(at), **entry_kwargs)
        self._seq += 1
        self._input_log.append(entry)
        return entry

    def log_pointer(self, x: int, y: int, buttons: int) -> InputLogEntry:
        with self._lock:
            clamped = False
            cx = min(max(x, 0), self.width - 1)
            cy = min(max(y, 0), self.height - 1)
            if (cx, cy) != (x, y):
                clamped = True
            entry = self._append(
                {"kind": "pointer", "x": cx, "y": cy, "buttons": buttons, "clamped": clamped}
            )
            if buttons and self.script.tap_skip:
                self.player.skip_step()
            return entry

    def log_key(self, keysym: int, down: bool) -> InputLogEntry:
        with self._lock:
            return self._append({"kind": "key", "keysym": keysym, "down": down})

    def log_composite(self, event: CompositeInputEvent) -> int:
        """Apply a whole gesture atomically: all samples share one group id
        and no foreign event gets a timestamp inside the group's span."""
        event.validate()
        with self._lock:
            group = self._next_group
            self._next_group += 1
            base = self._stamp()
            samples = []
            for track_id, track in event.tracks:
                for sample in track:
                    samples.append((sample.t_ms, track_id, sample))
            samples.sort(key=lambda item: (item[0], item[1]))
            for offset, track_id, sample in samples:
                cx = min(max(sample.x, 0), self.width - 1)
                cy = min(max(sample.y, 0), self.height - 1)
                entry = InputLogEntry(
                    seq=self._seq,
                    t_ms=base + offset,
                    kind="pointer",
                    x=cx,
                    y=cy,
                    buttons=1,
                    clamped=(cx, cy) != (sample.x, sample.y),
                    group_id=group,
                    track_id=track_id,
                )
                self._seq += 1
                self._input_log.append(entry)
            # anything logged after us lands strictly past the group's span
            self._reserved_until = base + event.duration_ms + 0.001
            return group

    def input_log(self) -> list[InputLogEntry]:
        with self._lock:
            return list(self._input_log)

    # --- apps & processes -------------------------------------------------

    def list_applications(self, running_only: bool = False) -> list[AppRecord]:
        with self._lock:
            apps = sorted(self.apps.values(), key=lambda a: a.package)
            return [a for a in apps if a.running] if running_only else apps

    def install_application(
        self, package: str, version: str, payload: bytes, overwrite: bool = False
    ) -> AppRecord:
        if not package:
            raise InvalidArgumentError("package id must not be empty")
        if not payload:
            raise InvalidArgumentError("package payload must not be empty")
        with self._lock:
            existing = self.apps.get(package)
            if existing and existing.version != version and not overwrite:
                raise DuplicateIdError(
                    f"{package} already installed at {existing.version}; overwrite not set"
                )
            self.fs.put(f"/data/app/{package}.apk", payload)
            name = existing.name if existing else package.rsplit(".", 1)[-1].capitalize()
            running = existing.running if existing else False
            record = AppRecord(package, name, version, running)
            self.apps[package] = record
            return record

    def list_processes(self) -> list[ProcessRecord]:
        with self._lock:
            return sorted(self.processes.values(), key=lambda p: p.pid)

    def kill_process(self, pid: int) -> None:
        with self._lock:
            if pid == 0 or pid not in self.processes:
                raise NotFoundError(f"no such pid: {pid}")
            victim = self.processes.pop(pid)
            if victim.package and not any(
                p.package == victim.package for p in self.processes.values()
            ):
                app = self.apps.get(victim.package)
                if app and app.running:
                    self.apps[victim.package] = replace(app, running=False)

    def spawn_process(self, name: str, package: str | None = None, kind: str = "process") -> ProcessRecord:
        with self._lock:
            pid = self._next_pid
            self._next_pid += 1
            record = ProcessRecord(pid, name, "running", kind, package)
            self.processes[pid] = record
            if package and package in self.apps and not self.apps[package].running:
                self.apps[package] = replace(self.apps[package], running=True)
            return record

    # --- status & sensors --------------------------------------------------

    def uptime_s(self) -> int:
        return int(self.now_ms() // 1000)

    def status(self) -> StatusReport:
        with self._lock:
            return StatusReport(
                battery=self.battery,
                uptime_s=self.uptime_s(),
                screen_on=True,
                network=self.network,
                alerts=tuple(self.alerts),
            )

    def raise_alert(self, message: str) -> None:
        with self._lock:
            self.alerts.append(message)
            listeners = list(self._alert_listeners)
        for listener in listeners:
            listener(message)

    def add_alert_listener(self, listener) -> None:
        with self._lock:
            self._alert_listeners.append(listener)

    def remove_alert_listener(self, listener) -> None:
        with self._lock:
            if listener in self._alert_listeners:
                self._alert_listeners.remove(listener)

    def sensor_read(self, kind: str) -> tuple[float, tuple[float, ...]]:
        tables = {**DEFAULT_SENSORS, **self.script.sensors}
        if kind not in tables:
            raise UnsupportedSensorError(f"no such sensor: {kind}")
        table = tables[kind]
        t = self.now_ms()
        values = _interpolate(table, t)
        return t, values

    # --- firmware -----------------------------------------------------------

    def firmware_stage(self, image: bytes, version: str) -> list[str]:
        if not image:
            raise InvalidArgumentError("firmware image must not be empty")
        if not version:
            raise InvalidArgumentError("firmware version must not be empty")
        with self._lock:
            self.fs.put(f"/sdcard/update-{version}.zip", image)
        return list(FIRMWARE_INSTRUCTIONS)

    # --- shell ----------------------------------------------------------------

    SHELL_COMMANDS = ("ls", "cat", "echo", "ps", "rm", "uname")

    def shell_exec(self, command_line: str) -> tuple[int, bytes, bytes]:
        try:
            argv = shlex.split(command_line)
        except ValueError as exc:
            raise UnknownCommandError(f"unparseable command line: {exc}") from exc
        if not argv:
            raise UnknownCommandError("empty command line")
        name, args = argv[0], argv[1:]
        if name not in self.SHELL_COMMANDS:
            raise UnknownCommandError(f"unknown command: {name}")
        with self._lock:
            return getattr(self, f"_sh_{name}")(args)

    def _sh_echo(self, args):
        return 0, (" ".join(args) + "\n").encode(), b""

    def _sh_ls(self, args):
        path = args[0] if args else "/"
        try:
            nodes = self.fs.list(path)
        except (NotFoundError, PathEscapeError) as exc:
            return 1, b"", f"ls: {exc}\n".encode()
        lines = []
        for node in nodes:
            base = node.path.rsplit("/", 1)[-1] or "/"
            lines.append(base + ("/" if node.kind == "dir" else ""))
        return 0, ("\n".join(lines) + "\n" if lines else "").encode(), b""

    def _sh_cat(self, args):
        if not args:
            return 1, b"", b"cat: missing operand\n"
        try:
            return 0, self.fs.get(args[0]), b""
        except (NotFoundError, IsADirectoryError_, PathEscapeError) as exc:
            return 1, b"", f"cat: {exc}\n".encode()

    def _sh_ps(self, args):
        lines = ["  PID NAME                          STATE     KIND"]
        for p in self.list_processes():
            lines.append(f"{p.pid:5d} {p.name:<29} {p.state:<9} {p.kind}")
        return 0, ("\n".join(lines) + "\n").encode(), b""

    def _sh_rm(self, args):
        recursive = "-r" in args
        paths = [a for a in args if a != "-r"]
        if not paths:
            return 1, b"", b"rm: missing operand\n"
        try:
            for path in paths:
                self.fs.remove(path, recursive=recursive)
        except (NotFoundError, IsADirectoryError_, InvalidArgumentError, PathEscapeError) as exc:
            return 1, b"", f"rm: {exc}\n".encode()
        return 0, b"", b""

    def _sh_uname(self, args):
        base = "Linux"
        full = "Linux remoteframe-sim 2.6.35.7-sim #1 PREEMPT armv7l Android"
        return 0, ((full if "-a" in args else base) + "\n").encode(), b""

    # --- consistency ------------------------------------------------------------

    def check_invariants(self) -> None:
        with self._lock:
            for app in self.apps.values():
                if app.running and not any(
                    p.package == app.package for p in self.processes.values()
                ):
                    raise AssertionError(f"running app {app.package} has no process row")
            pids = [p.pid for p in self.processes.values()]
            if len(pids) != len(set(pids)):
                raise AssertionError("duplicate pids in process table")
            log = self._input_log
            for earlier, later in zip(log, log[1:]):
                if later.t_ms < earlier.t_ms or later.seq <= earlier.seq:
                    raise AssertionError("input log not ordered by (timestamp, sequence)")


def _interpolate(table: list[tuple[int, tuple[float, ...]]], t: float) -> tuple[float, ...]:
    if t <= table[0][0]:
        return table[0][1]
    if t >= table[-1][0]:
        return table[-1][1]
    for (t0, v0), (t1, v1) in zip(table, table[1:]):
        if t0 <= t <= t1:
            if t1 == t0:
                return v1
            frac = (t - t0) / (t1 - t0)
            return tuple(a + (b - a) * frac for a, b in zip(v0, v1))
    return table[-1][1]


class _MonotonicClock:
    """Milliseconds since construction, wall-clock based."""

    def __init__(self):
        self._start = time.monotonic()

    def __call__(self) -> float:
        return (time.monotonic() - self._start) * 1000.0


class ManualClock:
    """Steppable clock for deterministic benchmark runs and tests."""

    def __init__(self, start_ms: float = 0.0):
        self._now = start_ms

    def __call__(self) -> float:
        return self._now

    def set(self, t_ms: float) -> None:
        if t_ms < self._now:
            raise ValueError("manual clock cannot go backwards")
        self._now = t_ms

    def advance(self, dt_ms: float) -> None:
        self.set(self._now + dt_ms)
