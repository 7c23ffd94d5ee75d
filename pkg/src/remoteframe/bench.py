"""Benchmark harness: run the workload scenario through an encoding and a
transport profile with an in-process server + headless client pair, and
report six comparison metrics.

Two timing modes:

* throttled profiles (usb, wifi) run in real time against the wall clock,
  so bandwidth and latency shape the update cadence;
* the unlimited profile steps a manual clock in fixed 16 ms increments and
  answers empty diffs immediately, which makes byte counters bit-identical
  across runs with the same seed.

"Data captured" is the raw pixel volume of the updated regions; "data
compressed" is the encoded payload volume.  Rect headers count toward
neither, which is what makes the Raw ratio exactly 1.
"""

from __future__ import annotations

import asyncio
import csv
import io
import json
import time
from dataclasses import asdict, dataclass

from .client import RfbClient
from .devicesim import DeviceSimulator, ManualClock, ScenarioScript
from .encodings import EncodingId
from .errors import InvalidArgumentError
from .server import RemoteFrameServer
from .streams import PROFILES, TransportProfile, duplex_pair, throttle

REQUEST_INTERVAL_S = 0.016  # client-side cap on update request rate
READ_GRACE_S = 0.3

ENCODING_NAMES = {
    "raw": EncodingId.RAW,
    "rre": EncodingId.RRE,
    "corre": EncodingId.CORRE,
    "hextile": EncodingId.HEXTILE,
    "zlib": EncodingId.ZLIB,
    "tight": EncodingId.TIGHT,
}

# Later entries must compress strictly better on the workload; under a
# bandwidth-starved link updates/second orders the same way.
RATIO_ORDER = ("raw", "rre", "hextile", "zlib", "tight")
UPDATES_ORDER = ("raw", "hextile", "zlib", "tight")

CSV_COLUMNS = (
    "encoding",
    "profile",
    "updates",
    "updates_per_second",
    "rectangles_received",
    "data_captured_mb",
    "data_compressed_mb",
    "compression_ratio",
    "wall_time_s",
)


@dataclass(frozen=True)
class BenchReport:
    encoding: str
    profile: str
    updates: int
    updates_per_second: float
    rectangles_received: int
    data_captured: int
    data_compressed: int
    compression_ratio: float
    wall_time: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchReport":
        return cls(**data)


def resolve_encoding(name: str) -> EncodingId:
    try:
        return ENCODING_NAMES[name.lower()]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown encoding {name!r}; choose from {', '.join(ENCODING_NAMES)}"
        ) from None


def resolve_profile(name: str) -> TransportProfile:
    try:
        return PROFILES[name.lower()]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown profile {name!r}; choose from {', '.join(PROFILES)}"
        ) from None


async def run_benchmark(
    scenario: ScenarioScript,
    encoding: EncodingId | str,
    profile: TransportProfile | str,
    *,
    duration_cap_s: float | None = None,
    seed: int | None = None,
) -> BenchReport:
    if isinstance(encoding, str):
        encoding = resolve_encoding(encoding)
    if isinstance(profile, str):
        profile = resolve_profile(profile)
    if seed is not None:
        scenario = ScenarioScript(
            scenario.width, scenario.height, seed, scenario.tap_skip, scenario.steps,
            scenario.sensors,
        )
    cap_s = duration_cap_s if duration_cap_s is not None else scenario.total_duration_ms / 1000.0

    virtual = profile.is_passthrough
    clock = ManualClock() if virtual else None
    device = DeviceSimulator(scenario, clock=clock, load_fixture=False)
    # fine-grained deferral polling so update cadence reflects the link, not
    # the server's poll quantum
    server = RemoteFrameServer(
        device,
        poll_interval_s=0.004,
        defer_empty_updates=not virtual,
    )

    server_stream, client_stream = duplex_pair()
    link_seed = (seed if seed is not None else scenario.seed) * 2 + 1
    server_task = asyncio.ensure_future(
        server.handle_rfb(throttle(server_stream, profile, seed=link_seed))
    )
    client = await RfbClient.connect(throttle(client_stream, profile, seed=link_seed + 1))
    await client.set_encodings([int(encoding)])

    updates = 0
    rect_count = 0
    captured = 0
    compressed = 0
    bpp_bytes = client.format.bytes_per_pixel

    start = time.monotonic()
    if virtual:
        sim_ms = 0
        await client.request_update(incremental=False)
        while True:
            rects = await client.read_update()
            client.apply(rects)
            if rects:
                updates += 1
                rect_count += len(rects)
                for enc in rects:
                    captured += enc.rect.area * bpp_bytes
                    compressed += len(enc.payload)
            sim_ms += 16
            if sim_ms > cap_s * 1000:
                break
            clock.set(sim_ms)
            await client.request_update(incremental=True)
        wall = time.monotonic() - start
    else:
        last_request = time.monotonic()
        await client.request_update(incremental=False)
        while True:
            remaining = cap_s - (time.monotonic() - start)
            if remaining <= -READ_GRACE_S:
                break
            try:
                rects = await asyncio.wait_for(
                    client.read_update(), timeout=max(remaining, 0) + READ_GRACE_S
                )
            except asyncio.TimeoutError:
                break
            client.apply(rects)
            if rects:
                updates += 1
                rect_count += len(rects)
                for enc in rects:
                    captured += enc.rect.area * bpp_bytes
                    compressed += len(enc.payload)
            if time.monotonic() - start >= cap_s:
                break
            wait = REQUEST_INTERVAL_S - (time.monotonic() - last_request)
            if wait > 0:
                await asyncio.sleep(wait)
            last_request = time.monotonic()
            await client.request_update(incremental=True)
        wall = time.monotonic() - start

    await client.close()
    server_task.cancel()
    try:
        await server_task
    except asyncio.CancelledError:
        pass
    await server.shutdown()

    return BenchReport(
        encoding=encoding.name.lower(),
        profile=profile.name,
        updates=updates,
        updates_per_second=updates / wall if wall > 0 else 0.0,
        rectangles_received=rect_count,
        data_captured=captured,
        data_compressed=compressed,
        compression_ratio=(captured / compressed) if compressed else 0.0,
        wall_time=wall,
    )


async def run_matrix(
    scenario: ScenarioScript,
    encodings: list[str],
    profiles: list[str],
    *,
    duration_cap_s: float | None = None,
    seed: int | None = None,
    repeat: int = 1,
) -> list[BenchReport]:
    """Sequential runs (never parallel, to keep timing unpolluted)."""
    reports = []
    for profile in profiles:
        for encoding in encodings:
            runs = []
            for _ in range(repeat):
                runs.append(
                    await run_benchmark(
                        scenario, encoding, profile,
                        duration_cap_s=duration_cap_s, seed=seed,
                    )
                )
            reports.append(runs[0] if repeat == 1 else _mean_report(runs))
    return reports


def _mean_report(runs: list[BenchReport]) -> BenchReport:
    n = len(runs)
    captured = sum(r.data_captured for r in runs) // n
    compressed = sum(r.data_compressed for r in runs) // n
    return BenchReport(
        encoding=runs[0].encoding,
        profile=runs[0].profile,
        updates=sum(r.updates for r in runs) // n,
        updates_per_second=sum(r.updates_per_second for r in runs) / n,
        rectangles_received=sum(r.rectangles_received for r in runs) // n,
        data_captured=captured,
        data_compressed=compressed,
        compression_ratio=(captured / compressed) if compressed else 0.0,
        wall_time=sum(r.wall_time for r in runs) / n,
    )


def _mb(n_bytes: int) -> float:
    return round(n_bytes / (1 << 20), 2)


def emit_report(reports: list[BenchReport], format: str = "table") -> bytes:
    if not reports:
        raise InvalidArgumentError("no reports to emit")
    if format == "json":
        return json.dumps([r.to_dict() for r in reports], indent=2).encode()
    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow(
                [
                    r.encoding,
                    r.profile,
                    r.updates,
                    f"{r.updates_per_second:.2f}",
                    r.rectangles_received,
                    f"{_mb(r.data_captured):.2f}",
                    f"{_mb(r.data_compressed):.2f}",
                    f"{r.compression_ratio:.2f}",
                    f"{r.wall_time:.2f}",
                ]
            )
        return out.getvalue().encode()
    if format == "table":
        lines = []
        for profile in dict.fromkeys(r.profile for r in reports):
            group = [r for r in reports if r.profile == profile]
            lines.append(f"profile: {profile}")
            header = ["metric"] + [r.encoding for r in group]
            rows = [
                ("Updates", [str(r.updates) for r in group]),
                ("Updates/second", [f"{r.updates_per_second:.2f}" for r in group]),
                ("Rectangles received", [str(r.rectangles_received) for r in group]),
                ("Data captured (MB)", [f"{_mb(r.data_captured):.2f}" for r in group]),
                ("Data compressed (MB)", [f"{_mb(r.data_compressed):.2f}" for r in group]),
                ("Compression ratio", [f"{r.compression_ratio:.2f}" for r in group]),
            ]
            widths = [max(len(header[0]), *(len(r[0]) for r in rows))] + [
                max(len(h), *(len(row[1][i]) for row in rows)) for i, h in enumerate(header[1:])
            ]
            lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
            for name, cells in rows:
                lines.append(
                    "  ".join(c.ljust(w) for c, w in zip([name] + cells, widths))
                )
            lines.append("")
        return "\n".join(lines).encode()
    raise InvalidArgumentError(f"unknown report format {format!r}")


def check_orderings(reports: list[BenchReport]) -> list[str]:
    """Verify the expected encoding orderings; returns human-readable
    violations (empty means all held)."""
    violations: list[str] = []
    by_key = {(r.profile, r.encoding): r for r in reports}
    profiles = list(dict.fromkeys(r.profile for r in reports))

    for profile in profiles:
        raw = by_key.get((profile, "raw"))
        if raw is not None and raw.compression_ratio != 1.0:
            violations.append(
                f"[{profile}] raw ratio must be exactly 1.0, got {raw.compression_ratio}"
            )
        chain = [by_key[(profile, e)] for e in RATIO_ORDER if (profile, e) in by_key]
        for worse, better in zip(chain, chain[1:]):
            if not better.compression_ratio > worse.compression_ratio:
                violations.append(
                    f"[{profile}] ratio({better.encoding})={better.compression_ratio:.2f} "
                    f"not > ratio({worse.encoding})={worse.compression_ratio:.2f}"
                )
        if profile == "wifi":
            # only the bandwidth-starved link orders by update rate
            ups_chain = [by_key[(profile, e)] for e in UPDATES_ORDER if (profile, e) in by_key]
            for worse, better in zip(ups_chain, ups_chain[1:]):
                if not better.updates_per_second > worse.updates_per_second:
                    violations.append(
                        f"[{profile}] updates/s({better.encoding})={better.updates_per_second:.2f} "
                        f"not > updates/s({worse.encoding})={worse.updates_per_second:.2f}"
                    )

    if "usb" in profiles and "wifi" in profiles:
        for encoding in dict.fromkeys(r.encoding for r in reports):
            usb = by_key.get(("usb", encoding))
            wifi = by_key.get(("wifi", encoding))
            if usb and wifi and wifi.updates_per_second > usb.updates_per_second:
                violations.append(
                    f"updates/s of {encoding} under wifi ({wifi.updates_per_second:.2f}) "
                    f"exceeds usb ({usb.updates_per_second:.2f})"
                )
    return violations
