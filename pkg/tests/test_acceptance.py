"""Acceptance suite: every exit criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one [PASS]/[FAIL] line
per criterion.  The benchmark criteria replay the full workload in real
time under throttled profiles, so this module takes a few minutes.
"""

import asyncio
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest

from remoteframe.auth import AuthPolicy, CHANNEL_RFB, compute_mac
from remoteframe.bench import run_benchmark, run_matrix
from remoteframe.client import CmdClient, RfbClient, open_tcp_stream
from remoteframe.devicesim import DeviceSimulator, ManualClock, ScenarioScript, ScenarioStep, benchmark_workload
from remoteframe.encodings import (
    CompressionContext,
    EncodingId,
    decode_rect,
    encode_rect,
    select_encoding,
)
from remoteframe.envelope import FS_PUT_FIRST, OPCODES, CommandEnvelope, PayloadReader, PayloadWriter, parse_error
from remoteframe.errors import AuthFailedError, NotFoundError
from remoteframe.pixels import CANONICAL_FORMAT, RGB565_FORMAT, FrameBuffer, Rectangle, convert_grid
from remoteframe.rfb import PROTOCOL_VERSION, server_handshake
from remoteframe.server import RemoteFrameServer
from remoteframe.services import ServiceDispatcher
from remoteframe.streams import TapStream, duplex_pair

from conftest import random_framebuffer
from goldens import GOLDEN_DIR, generate_all


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def run(coro):
    return asyncio.run(coro)


# --- 1. losslessness ---------------------------------------------------------


ALL_ENCODINGS = (
    EncodingId.RAW,
    EncodingId.RRE,
    EncodingId.CORRE,
    EncodingId.HEXTILE,
    EncodingId.ZLIB,
    EncodingId.TIGHT,
)


def test_losslessness_1000_rects_per_encoding():
    with criterion("losslessness: 6 encodings x 1000 random rects, 16/32 bpp, < 60 s"):
        start = time.monotonic()
        rng = np.random.default_rng(0xACCE55)
        color_choices = (2, 5, 16, 64, 0)  # 0 = unrestricted
        for encoding in ALL_ENCODINGS:
            enc_ctx = CompressionContext()
            dec_ctx = CompressionContext()
            for case in range(1000):
                w = int(rng.integers(1, 129))
                h = int(rng.integers(1, 129))
                colors = int(rng.choice(color_choices)) or None
                fmt = CANONICAL_FORMAT if case % 2 == 0 else RGB565_FORMAT
                fb = random_framebuffer(rng, w, h, colors=colors)
                rect = Rectangle(0, 0, w, h)
                expected = convert_grid(fb.pixels, CANONICAL_FORMAT, fmt)
                out = np.zeros_like(expected)
                for enc in encode_rect(fb, rect, fmt, encoding, enc_ctx):
                    grid = decode_rect(enc, fmt, dec_ctx)
                    r = enc.rect
                    out[r.y : r.y + r.h, r.x : r.x + r.w] = grid
                assert np.array_equal(out, expected), (
                    f"{encoding.name} case {case} ({w}x{h}, {colors} colors, "
                    f"{fmt.bits_per_pixel} bpp) not bit-exact"
                )
                if case % 250 == 249:
                    enc_ctx = CompressionContext()
                    dec_ctx = CompressionContext()
        elapsed = time.monotonic() - start
        assert elapsed < 60, f"losslessness suite took {elapsed:.1f}s (budget 60s)"


# --- 2. negotiation ----------------------------------------------------------


NEGOTIATION_TABLE = [
    ([7, 5, 0], EncodingId.TIGHT),
    ([5, 7], EncodingId.HEXTILE),
    ([0], EncodingId.RAW),
    ([2], EncodingId.RRE),
    ([4], EncodingId.CORRE),
    ([6], EncodingId.ZLIB),
    ([6, 7], EncodingId.ZLIB),
    ([999], EncodingId.RAW),
    ([999, -312, 1000], EncodingId.RAW),
    ([], EncodingId.RAW),
    ([-239, 7], EncodingId.TIGHT),
    ([1, 3], EncodingId.RAW),  # CopyRect/unassigned ids are not offered
    ([3, 5], EncodingId.HEXTILE),
    ([0, 7], EncodingId.RAW),
    ([7, 7, 7], EncodingId.TIGHT),
    ([2, 4], EncodingId.RRE),
    ([4, 2], EncodingId.CORRE),
    ([-1], EncodingId.RAW),
    ([16, 5], EncodingId.HEXTILE),  # ZRLE unsupported, fall through
    ([1000000, 6, 0], EncodingId.ZLIB),
]


def test_negotiation_fallback_table():
    with criterion("negotiation: 20-case preference table incl. unknown-ids-only"):
        assert len(NEGOTIATION_TABLE) == 20
        for prefs, expected in NEGOTIATION_TABLE:
            got = select_encoding(prefs)
            assert got == expected, f"prefs {prefs}: expected {expected.name}, got {got.name}"


# --- 3 & 4. benchmark orderings ------------------------------------------------


@pytest.fixture(scope="module")
def bench_reports():
    scenario = benchmark_workload()

    async def run_all():
        started = time.monotonic()
        usb = await run_matrix(
            scenario, ["raw", "rre", "hextile", "zlib", "tight"], ["usb"]
        )
        usb_elapsed = time.monotonic() - started
        wifi = await run_matrix(scenario, ["raw", "hextile", "zlib", "tight"], ["wifi"])
        return usb, wifi, usb_elapsed

    return run(run_all())


def test_usb_compression_ratio_ordering(bench_reports):
    with criterion("benchmark: usb ratio ordering, raw==1.0, tight>=10, <2 min"):
        usb, _, usb_elapsed = bench_reports
        ratios = {r.encoding: r.compression_ratio for r in usb}
        assert ratios["raw"] == 1.0, f"raw ratio {ratios['raw']} != 1.0"
        chain = [ratios[e] for e in ("raw", "rre", "hextile", "zlib", "tight")]
        assert all(a < b for a, b in zip(chain, chain[1:])), f"ratio chain broken: {ratios}"
        assert ratios["tight"] >= 10, f"tight ratio {ratios['tight']:.2f} below the desk-scale bar"
        assert usb_elapsed < 120, f"usb benchmark block took {usb_elapsed:.0f}s (budget 120s)"


def test_wifi_update_rate_ordering(bench_reports):
    with criterion("benchmark: wifi updates/s ordering and wifi <= usb per encoding"):
        usb, wifi, _ = bench_reports
        wifi_ups = {r.encoding: r.updates_per_second for r in wifi}
        chain = [wifi_ups[e] for e in ("raw", "hextile", "zlib", "tight")]
        assert all(a < b for a, b in zip(chain, chain[1:])), f"wifi rate chain broken: {wifi_ups}"
        usb_ups = {r.encoding: r.updates_per_second for r in usb}
        for encoding, wifi_rate in wifi_ups.items():
            assert wifi_rate <= usb_ups[encoding], (
                f"{encoding}: wifi {wifi_rate:.2f}/s exceeds usb {usb_ups[encoding]:.2f}/s"
            )


# --- 5. protocol goldens ----------------------------------------------------------


def test_protocol_golden_files_byte_for_byte():
    with criterion("protocol goldens: handshake, ServerInit 480x800, one update per encoding"):
        fresh = generate_all()
        expected_names = {
            "handshake_server_to_client.bin",
            "handshake_client_to_server.bin",
            "serverinit_480x800.bin",
            "update_raw.bin",
            "update_rre.bin",
            "update_corre.bin",
            "update_hextile.bin",
            "update_zlib.bin",
            "update_tight.bin",
        }
        assert expected_names <= set(fresh)
        for name in sorted(expected_names):
            on_disk = (GOLDEN_DIR / name).read_bytes()
            assert fresh[name] == on_disk, f"{name} does not match the checked-in golden"


# --- 6. service model -------------------------------------------------------------


def test_fs_model_500_operations():
    with criterion("service model: 500 random fs ops match the reference tree"):
        script = ScenarioScript(width=64, height=64, steps=(ScenarioStep("home", 500, {"icons": 4}),))
        dispatcher = ServiceDispatcher(DeviceSimulator(script, clock=ManualClock()))
        rng = random.Random(0xF5)
        model: dict[str, bytes] = {}
        stack = ["/"]
        while stack:
            for node in dispatcher.device.fs.list(stack.pop()):
                if node.kind == "dir":
                    stack.append(node.path)
                else:
                    model[node.path] = dispatcher.device.fs.get(node.path)
        paths = [f"/data/m{i}" for i in range(10)] + [f"/sdcard/deep/n{i}" for i in range(8)]
        for step in range(500):
            op = rng.choice(("put", "get", "remove"))
            path = rng.choice(paths)
            corr = step + 1
            if op == "put":
                data = rng.randbytes(rng.randrange(0, 128))
                env = CommandEnvelope(
                    OPCODES["FS_PUT"], corr,
                    PayloadWriter().string(path).u8(FS_PUT_FIRST).blob(data).done(),
                )
                response = dispatcher.handle(env)
                assert response.opcode == OPCODES["FS_PUT"], parse_error(response.payload)
                model[path] = data
            elif op == "get":
                env = CommandEnvelope(OPCODES["FS_GET"], corr, PayloadWriter().string(path).done())
                response = dispatcher.handle(env)
                if path in model:
                    assert PayloadReader(response.payload).blob() == model[path]
                else:
                    assert response.opcode == OPCODES["ERROR"]
                    assert parse_error(response.payload)[0] == NotFoundError.code
            else:
                env = CommandEnvelope(
                    OPCODES["FS_REMOVE"], corr, PayloadWriter().string(path).flag(False).done()
                )
                response = dispatcher.handle(env)
                if path in model:
                    assert response.opcode == OPCODES["FS_REMOVE"]
                    del model[path]
                else:
                    assert response.opcode == OPCODES["ERROR"]
        for path, data in model.items():
            assert dispatcher.device.fs.get(path) == data


def test_app_process_state_machine_200_calls():
    with criterion("service model: app/process invariants after 200 random service calls"):
        script = ScenarioScript(width=64, height=64, steps=(ScenarioStep("home", 500, {"icons": 4}),))
        dispatcher = ServiceDispatcher(DeviceSimulator(script, clock=ManualClock()))
        rng = random.Random(0xA11)
        pids = [p.pid for p in dispatcher.device.list_processes()]
        for step in range(200):
            op = rng.randrange(6)
            if op == 0:
                dispatcher.handle(
                    CommandEnvelope(OPCODES["APP_LIST"], step, PayloadWriter().flag(False).done())
                )
            elif op == 1:
                payload = (
                    PayloadWriter()
                    .string(f"com.example.rand{rng.randrange(5)}")
                    .string(f"2.{rng.randrange(3)}")
                    .flag(True)
                    .blob(b"PK" + rng.randbytes(4))
                    .done()
                )
                dispatcher.handle(CommandEnvelope(OPCODES["APP_INSTALL"], step, payload))
            elif op == 2:
                target = rng.choice(pids + [0, 4242])
                dispatcher.handle(
                    CommandEnvelope(OPCODES["PROC_KILL"], step, PayloadWriter().u32(target).done())
                )
            elif op == 3:
                dispatcher.handle(CommandEnvelope(OPCODES["PROC_LIST"], step))
            elif op == 4:
                dispatcher.handle(
                    CommandEnvelope(OPCODES["SHELL_EXEC"], step, PayloadWriter().string("ps").done())
                )
            else:
                dispatcher.handle(CommandEnvelope(OPCODES["STATUS_GET"], step))
            dispatcher.device.check_invariants()


# --- 7. security ----------------------------------------------------------------------


def test_security_rejections_and_wire_hygiene():
    with criterion("security: wrong secret and replayed MAC rejected; no secret bytes on the wire"):
        secret = b"correct-horse-battery-staple"

        async def wrong_secret():
            server_side, client_side = duplex_pair()
            task = asyncio.ensure_future(
                server_handshake(server_side, AuthPolicy.shared_secret(secret), 480, 800)
            )
            with pytest.raises(AuthFailedError):
                await RfbClient.connect(client_side, b"wrong-password")
            with pytest.raises(AuthFailedError):
                await task

        run(wrong_secret())

        async def replayed_mac():
            captured = compute_mac(secret, bytes(range(16)), CHANNEL_RFB)
            server_side, client_side = duplex_pair()
            task = asyncio.ensure_future(
                server_handshake(
                    server_side, AuthPolicy.shared_secret(secret), 480, 800,
                    nonce_source=lambda n: bytes(reversed(range(n))),
                )
            )
            await client_side.read_exactly(12)
            await client_side.write(PROTOCOL_VERSION)
            await client_side.read_exactly(2)
            await client_side.write(bytes([113]))
            await client_side.read_exactly(16)
            await client_side.write(captured)  # MAC for a different nonce
            with pytest.raises(AuthFailedError):
                await task

        run(replayed_mac())

        async def wire_hygiene():
            server_side, client_side = duplex_pair()
            tap = TapStream(client_side)
            task = asyncio.ensure_future(
                server_handshake(server_side, AuthPolicy.shared_secret(secret), 480, 800)
            )
            await RfbClient.connect(tap, secret)
            await task
            capture = bytes(tap.sent) + bytes(tap.received)
            assert secret not in capture

        run(wire_hygiene())


# --- 8. concurrency --------------------------------------------------------------------


CONCURRENCY_SECONDS = 30.0


def test_concurrency_eight_clients_with_one_misbehaving():
    with criterion("concurrency: 4 RFB + 4 cmd clients for 30 s beside a misbehaving client"):
        script = ScenarioScript(
            width=240,
            height=320,
            seed=13,
            steps=(
                ScenarioStep("home", 1000, {"icons": 8}),
                ScenarioStep("transition", 300),
                ScenarioStep("browser_scroll", 32000),
            ),
        )

        async def scenario():
            device = DeviceSimulator(script)
            server = RemoteFrameServer(device, poll_interval_s=0.02)
            await server.start_tcp("127.0.0.1", 0, 0)
            rfb_port = server._tcp_servers[0].sockets[0].getsockname()[1]
            cmd_port = server._tcp_servers[1].sockets[0].getsockname()[1]
            deadline = asyncio.get_running_loop().time() + CONCURRENCY_SECONDS

            async def rfb_worker(n: int) -> int:
                client = await RfbClient.connect(await open_tcp_stream("127.0.0.1", rfb_port))
                await client.set_encodings([int(EncodingId.TIGHT)])
                cycles = 0
                while asyncio.get_running_loop().time() < deadline:
                    # alternate small non-incremental probes with full
                    # incremental requests; replies must match in order
                    probe = Rectangle((cycles * 16) % 224, (n * 32) % 288, 16, 16)
                    await client.request_update(probe, incremental=False)
                    rects = await asyncio.wait_for(client.read_update(), timeout=10)
                    assert rects, "non-incremental request must answer immediately"
                    assert rects[0].rect.x == probe.x and rects[0].rect.y == probe.y, (
                        f"client {n}: reply out of order at cycle {cycles}"
                    )
                    client.apply(rects)
                    await client.request_update(incremental=True)
                    rects = await asyncio.wait_for(client.read_update(), timeout=10)
                    client.apply(rects)
                    cycles += 1
                    await asyncio.sleep(0.05)
                await client.close()
                return cycles

            async def cmd_worker(n: int) -> int:
                client = await CmdClient.connect(await open_tcp_stream("127.0.0.1", cmd_port))
                cycles = 0
                path = f"/data/worker{n}.bin"
                while asyncio.get_running_loop().time() < deadline:
                    status = await client.status()
                    assert status["battery"] == 80
                    blob = bytes([n]) * (n + 1) * 10
                    await client.fs_put(path, blob)
                    assert await client.fs_get(path) == blob
                    code, out, _ = await client.shell_exec("ps")
                    assert code == 0 and b"PID" in out
                    cycles += 1
                    await asyncio.sleep(0.05)
                await client.close()
                return cycles

            async def misbehaving_client() -> None:
                stream = await open_tcp_stream("127.0.0.1", rfb_port)
                await stream.read_exactly(12)
                await stream.write(PROTOCOL_VERSION)
                await stream.read_exactly(2)
                await stream.write(bytes([1]))
                await stream.read_exactly(4)
                await stream.write(bytes([1]))
                await stream.read_exactly(20)
                # now spew garbage mid-protocol and vanish
                await stream.write(b"\xde\xad\xbe\xef" * 64)
                await stream.close()

            workers = [rfb_worker(i) for i in range(4)] + [cmd_worker(i) for i in range(4)]
            results = await asyncio.gather(*workers, misbehaving_client())
            await server.shutdown()
            return results[:8]

        cycles = run(scenario())
        rfb_cycles, cmd_cycles = cycles[:4], cycles[4:]
        assert all(c >= 20 for c in rfb_cycles), f"rfb workers too slow: {rfb_cycles}"
        assert all(c >= 50 for c in cmd_cycles), f"cmd workers too slow: {cmd_cycles}"


# --- 9. determinism ------------------------------------------------------------------------


def test_benchmark_determinism_unthrottled():
    with criterion("determinism: identical seed + unthrottled profile => identical byte counters"):
        scenario = benchmark_workload(seed=21)
        first = run(run_benchmark(scenario, "tight", "none", duration_cap_s=2.5))
        second = run(run_benchmark(scenario, "tight", "none", duration_cap_s=2.5))
        assert first.updates == second.updates
        assert first.rectangles_received == second.rectangles_received
        assert first.data_captured == second.data_captured
        assert first.data_compressed == second.data_compressed
