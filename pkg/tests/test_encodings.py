import struct
import zlib as zlib_module

import numpy as np
import pytest

from remoteframe.encodings import (
    ByteCursor,
    CompressionContext,
    EncodedRect,
    EncodingId,
    decode_rect,
    encode_rect,
    select_encoding,
)
from remoteframe.encodings import corre, hextile, raw, rre, tightenc, zlibenc
from remoteframe.errors import (
    MalformedPayloadError,
    OutOfBoundsError,
    TruncatedPayloadError,
    UnknownEncodingError,
)
from remoteframe.pixels import CANONICAL_FORMAT, RGB565_FORMAT, FrameBuffer, Rectangle

from conftest import random_framebuffer


def fb_from_grid(grid: np.ndarray) -> FrameBuffer:
    h, w = grid.shape
    return FrameBuffer(w, h, CANONICAL_FORMAT, grid)


def full_rect(fb: FrameBuffer) -> Rectangle:
    return Rectangle(0, 0, fb.width, fb.height)


def greedy_subrect_oracle(grid: np.ndarray, background: int) -> list[tuple[int, int, int, int, int]]:
    """Independent subrect extraction: scan rows for maximal single-color runs
    of non-background pixels, then merge a run into the rect directly above it
    when x, width and color all match."""
    h, w = grid.shape
    rects: list[list[int]] = []
    for y in range(h):
        x = 0
        while x < w:
            color = int(grid[y, x])
            if color == background:
                x += 1
                continue
            x0 = x
            while x < w and int(grid[y, x]) == color:
                x += 1
            run_w = x - x0
            for r in rects:
                if r[0] == color and r[1] == x0 and r[3] == run_w and r[2] + r[4] == y:
                    r[4] += 1
                    break
            else:
                rects.append([color, x0, y, run_w, 1])
    return [tuple(r) for r in rects]


class TestRaw:
    def test_payload_length_formula(self):
        fb = random_framebuffer(np.random.default_rng(1), 8, 8)
        enc = raw.encode(fb, Rectangle(0, 0, 2, 2), CANONICAL_FORMAT)
        assert len(enc.payload) == 2 * 2 * 4

    def test_little_endian_serialization(self):
        # serialization oracle: 0x00FF0000 little-endian u32 -> 00 00 FF 00
        fb = fb_from_grid(np.array([[0x00FF0000]], dtype=np.uint32))
        enc = raw.encode(fb, Rectangle(0, 0, 1, 1), CANONICAL_FORMAT)
        assert enc.payload == bytes([0x00, 0x00, 0xFF, 0x00])

    def test_round_trip(self, rng, wire_format):
        fb = random_framebuffer(rng, 17, 13)
        rect = Rectangle(3, 2, 9, 7)
        enc = raw.encode(fb, rect, wire_format)
        grid = decode_rect(enc, wire_format)
        expected = raw.decode(enc.payload, rect.w, rect.h, wire_format)
        assert np.array_equal(grid, expected)

    def test_out_of_bounds(self):
        fb = FrameBuffer(8, 8, CANONICAL_FORMAT)
        with pytest.raises(OutOfBoundsError):
            raw.encode(fb, Rectangle(4, 4, 8, 8), CANONICAL_FORMAT)

    def test_decode_rejects_wrong_length(self):
        with pytest.raises(TruncatedPayloadError):
            raw.decode(b"\x00" * 15, 2, 2, CANONICAL_FORMAT)
        with pytest.raises(MalformedPayloadError):
            raw.decode(b"\x00" * 17, 2, 2, CANONICAL_FORMAT)


class TestRre:
    def test_uniform_rect_is_count_zero(self):
        fb = fb_from_grid(np.full((8, 8), 0x00336699, dtype=np.uint32))
        enc = rre.encode(fb, full_rect(fb), CANONICAL_FORMAT)
        assert len(enc.payload) == 4 + 4
        assert struct.unpack(">I", enc.payload[:4])[0] == 0

    def test_two_row_rect_matches_extraction_oracle(self):
        # 4x2: top row A, bottom row B; A < B so the modal tie picks A
        a, b = 0x00111111, 0x00222222
        grid = np.array([[a] * 4, [b] * 4], dtype=np.uint32)
        assert greedy_subrect_oracle(grid, a) == [(b, 0, 1, 4, 1)]

        enc = rre.encode(fb_from_grid(grid), Rectangle(0, 0, 4, 2), CANONICAL_FORMAT)
        assert len(enc.payload) == 4 + 4 + (4 + 8)
        count = struct.unpack(">I", enc.payload[:4])[0]
        background = struct.unpack("<I", enc.payload[4:8])[0]
        sub_color = struct.unpack("<I", enc.payload[8:12])[0]
        coords = struct.unpack(">HHHH", enc.payload[12:20])
        assert (count, background, sub_color, coords) == (1, a, b, (0, 1, 4, 1))

    def test_subrects_match_oracle_on_random_grids(self, rng):
        for _ in range(20):
            grid = rng.integers(0, 4, size=(9, 11), dtype=np.uint32)
            background = rre.modal_color(grid)
            from remoteframe.encodings.runs import merged_subrects

            assert sorted(merged_subrects(grid, background)) == sorted(
                greedy_subrect_oracle(grid, background)
            )

    def test_round_trip(self, rng, wire_format):
        fb = random_framebuffer(rng, 21, 17, colors=5)
        rect = Rectangle(1, 2, 19, 13)
        enc = rre.encode(fb, rect, wire_format)
        decoded = decode_rect(enc, wire_format)
        expected = np.array(
            [
                [
                    _convert(int(fb.pixels[y, x]), wire_format)
                    for x in range(rect.x, rect.x + rect.w)
                ]
                for y in range(rect.y, rect.y + rect.h)
            ],
            dtype=np.uint32,
        )
        assert np.array_equal(decoded, expected)

    def test_decode_count_zero_fills_background(self):
        payload = struct.pack(">I", 0) + struct.pack("<I", 0x00ABCDEF)
        grid = rre.decode(payload, 3, 2, CANONICAL_FORMAT)
        assert np.array_equal(grid, np.full((2, 3), 0x00ABCDEF, dtype=np.uint32))

    def test_decode_rejects_overflowing_subrect(self):
        payload = (
            struct.pack(">I", 1)
            + struct.pack("<I", 0)
            + struct.pack("<I", 1)
            + struct.pack(">HHHH", 3, 0, 2, 1)
        )
        with pytest.raises(MalformedPayloadError):
            rre.decode(payload, 4, 4, CANONICAL_FORMAT)


def _convert(value, fmt):
    from remoteframe.pixels import convert_pixel

    return convert_pixel(value, CANONICAL_FORMAT, fmt)


class TestCorre:
    def test_small_rect_single_chunk(self, rng):
        fb = random_framebuffer(rng, 120, 120, colors=3)
        chunks = corre.encode(fb, Rectangle(0, 0, 100, 100), CANONICAL_FORMAT)
        assert len(chunks) == 1

    def test_wide_rect_splits_at_255(self, rng):
        fb = random_framebuffer(rng, 300, 100, colors=3)
        chunks = corre.encode(fb, Rectangle(0, 0, 300, 100), CANONICAL_FORMAT)
        assert [c.rect.w for c in chunks] == [255, 45]
        assert all(c.rect.h == 100 for c in chunks)

    def test_uniform_chunk_payload_size(self):
        fb = fb_from_grid(np.full((255, 255), 5, dtype=np.uint32))
        chunks = corre.encode(fb, full_rect(fb), CANONICAL_FORMAT)
        assert len(chunks) == 1
        assert len(chunks[0].payload) == 4 + 4

    def test_round_trip_reassembles_source(self, rng):
        fb = random_framebuffer(rng, 300, 270, colors=6)
        rect = full_rect(fb)
        out = np.zeros((rect.h, rect.w), dtype=np.uint32)
        for chunk in corre.encode(fb, rect, CANONICAL_FORMAT):
            grid = decode_rect(chunk, CANONICAL_FORMAT)
            r = chunk.rect
            out[r.y : r.y + r.h, r.x : r.x + r.w] = grid
        assert np.array_equal(out, fb.pixels)


class TestHextile:
    def test_tile_count(self, rng):
        fb = random_framebuffer(rng, 32, 32)
        enc = hextile.encode(fb, full_rect(fb), CANONICAL_FORMAT)
        grid = decode_rect(enc, CANONICAL_FORMAT)
        assert np.array_equal(grid, fb.pixels)
        # layout oracle: count mask bytes by walking the payload
        assert _count_hextile_tiles(enc.payload, 32, 32, CANONICAL_FORMAT) == 4

    def test_uniform_first_tile_layout(self):
        fb = fb_from_grid(np.full((16, 16), 0x00102030, dtype=np.uint32))
        enc = hextile.encode(fb, full_rect(fb), CANONICAL_FORMAT)
        assert enc.payload[0] == 0x02
        assert len(enc.payload) == 1 + 4

    def test_uniform_second_tile_carries_background(self):
        fb = fb_from_grid(np.full((16, 32), 0x00102030, dtype=np.uint32))
        enc = hextile.encode(fb, full_rect(fb), CANONICAL_FORMAT)
        assert len(enc.payload) == (1 + 4) + 1
        assert enc.payload[5] == 0x00

    def test_round_trip_and_tile_payload_bound(self, rng, wire_format):
        for _ in range(10):
            w = int(rng.integers(1, 70))
            h = int(rng.integers(1, 70))
            fb = random_framebuffer(rng, w, h, colors=int(rng.integers(2, 40)))
            enc = hextile.encode(fb, full_rect(fb), wire_format)
            decoded = decode_rect(enc, wire_format)
            from remoteframe.pixels import convert_grid

            assert np.array_equal(decoded, convert_grid(fb.pixels, CANONICAL_FORMAT, wire_format))
            ntiles = ((w + 15) // 16) * ((h + 15) // 16)
            # raw fallback bounds every tile at mask + full tile pixels
            assert len(enc.payload) <= ntiles * (1 + 256 * wire_format.bytes_per_pixel)

    def test_decode_rejects_subrect_outside_tile(self):
        # 8x8 tile, background + 1 two-pixel subrect at x=7 overflows
        payload = bytes([0x02 | 0x08 | 0x10]) + struct.pack("<I", 0) + bytes([1]) + struct.pack(
            "<I", 1
        ) + bytes([(7 << 4) | 0, (1 << 4) | 0])
        with pytest.raises(MalformedPayloadError):
            hextile.decode(payload, 8, 8, CANONICAL_FORMAT)


def _count_hextile_tiles(payload: bytes, w: int, h: int, fmt) -> int:
    cur = ByteCursor(payload)
    bpp = fmt.bytes_per_pixel
    count = 0
    for ty in range(0, h, 16):
        th = min(16, h - ty)
        for tx in range(0, w, 16):
            tw = min(16, w - tx)
            mask = cur.u8()
            count += 1
            if mask & 1:
                cur.take(tw * th * bpp)
                continue
            if mask & 2:
                cur.take(bpp)
            if mask & 4:
                cur.take(bpp)
            if mask & 8:
                n = cur.u8()
                per = (bpp + 2) if mask & 16 else 2
                cur.take(n * per)
    assert cur.at_end()
    return count


class TestZlib:
    def test_payload_inflates_to_raw_bytes(self, rng):
        fb = random_framebuffer(rng, 24, 16)
        rect = full_rect(fb)
        ctx = CompressionContext()
        enc = zlibenc.encode(fb, rect, CANONICAL_FORMAT, ctx)
        (length,) = struct.unpack(">I", enc.payload[:4])
        assert length == len(enc.payload) - 4
        inflater = zlib_module.decompressobj()
        raw_bytes = inflater.decompress(enc.payload[4:])
        assert raw_bytes == raw.encode(fb, rect, CANONICAL_FORMAT).payload

    def test_uniform_rect_compresses(self):
        fb = fb_from_grid(np.full((64, 64), 0x00777777, dtype=np.uint32))
        ctx = CompressionContext()
        enc = zlibenc.encode(fb, full_rect(fb), CANONICAL_FORMAT, ctx)
        assert len(enc.payload) < 64 * 64 * 4

    def test_persistent_stream_shrinks_repeats(self, rng):
        fb = random_framebuffer(rng, 32, 32)
        rect = full_rect(fb)
        ctx = CompressionContext()
        first = zlibenc.encode(fb, rect, CANONICAL_FORMAT, ctx)
        second = zlibenc.encode(fb, rect, CANONICAL_FORMAT, ctx)
        assert len(second.payload) <= len(first.payload)

    def test_round_trip_through_session_streams(self, rng):
        enc_ctx = CompressionContext()
        dec_ctx = CompressionContext()
        for _ in range(5):
            fb = random_framebuffer(rng, 20, 20)
            enc = zlibenc.encode(fb, full_rect(fb), CANONICAL_FORMAT, enc_ctx)
            grid = decode_rect(enc, CANONICAL_FORMAT, dec_ctx)
            assert np.array_equal(grid, fb.pixels)

    def test_stream_isolation_across_sessions(self, rng):
        # interleaving two sessions' encodings never changes either's output
        ctx_a, ctx_b = CompressionContext(), CompressionContext()
        dec_a, dec_b = CompressionContext(), CompressionContext()
        frames = [random_framebuffer(rng, 16, 16) for _ in range(6)]
        for i, fb in enumerate(frames):
            ctx, dec = (ctx_a, dec_a) if i % 2 == 0 else (ctx_b, dec_b)
            enc = zlibenc.encode(fb, full_rect(fb), CANONICAL_FORMAT, ctx)
            assert np.array_equal(decode_rect(enc, CANONICAL_FORMAT, dec), fb.pixels)


class TestTight:
    def test_fill_layout(self):
        fb = fb_from_grid(np.full((10, 10), 0x00A1B2C3, dtype=np.uint32))
        ctx = CompressionContext()
        enc = tightenc.encode(fb, full_rect(fb), CANONICAL_FORMAT, ctx)
        assert enc.payload == bytes([0x80, 0xA1, 0xB2, 0xC3])

    def test_two_color_checkerboard_palette_layout(self):
        a, b = 0x00000000, 0x00FFFFFF
        grid = np.fromfunction(lambda y, x: (x + y) % 2, (16, 16)).astype(np.uint32) * b
        fb = fb_from_grid(grid)
        ctx = CompressionContext()
        enc = tightenc.encode(fb, full_rect(fb), CANONICAL_FORMAT, ctx)
        # palette-packing oracle: stream 1 + explicit filter, palette byte = 1,
        # two TPIXELs, then compressed 1-bit rows (2 bytes/row uncompressed)
        assert enc.payload[0] == (1 << 4) | 0x40
        assert enc.payload[1] == tightenc.FILTER_PALETTE
        assert enc.payload[2] == 1
        assert enc.payload[3:6] == bytes([0, 0, 0])
        assert enc.payload[6:9] == bytes([0xFF, 0xFF, 0xFF])
        cur = ByteCursor(enc.payload[9:])
        clen = tightenc.read_compact_length(cur)
        packed = CompressionContext().inflate_tight(1, cur.take(clen), 32)
        expected_rows = np.packbits((grid != 0).astype(np.uint8), axis=1).tobytes()
        assert packed == expected_rows
        assert len(expected_rows) == 2 * 16

    def test_small_palette_data_travels_verbatim(self):
        # 2x2 two-color rect: packed rows = 2 bytes < 12, no compression
        grid = np.array([[1, 2], [2, 1]], dtype=np.uint32)
        ctx = CompressionContext()
        enc = tightenc.encode(fb_from_grid(grid), Rectangle(0, 0, 2, 2), CANONICAL_FORMAT, ctx)
        assert len(enc.payload) == 1 + 1 + 1 + 3 + 3 + 2
        assert np.array_equal(decode_rect(enc, CANONICAL_FORMAT, CompressionContext()), grid)

    def test_copy_filter_for_many_colors(self, rng):
        fb = random_framebuffer(rng, 16, 16)
        ctx = CompressionContext()
        enc = tightenc.encode(fb, full_rect(fb), CANONICAL_FORMAT, ctx)
        assert enc.payload[0] == 0x00  # stream 0, implicit copy filter
        assert np.array_equal(decode_rect(enc, CANONICAL_FORMAT, CompressionContext()), fb.pixels)

    def test_round_trip(self, rng, wire_format):
        enc_ctx = CompressionContext()
        dec_ctx = CompressionContext()
        for colors in (2, 3, 16, 17, None):
            fb = random_framebuffer(rng, 33, 29, colors=colors)
            enc = tightenc.encode(fb, full_rect(fb), wire_format, enc_ctx)
            decoded = decode_rect(enc, wire_format, dec_ctx)
            from remoteframe.pixels import convert_grid

            assert np.array_equal(decoded, convert_grid(fb.pixels, CANONICAL_FORMAT, wire_format))

    def test_gradient_filter_decodes(self):
        # hand-built gradient-filtered rect: verify against a per-pixel
        # prediction oracle implemented right here
        rng = np.random.default_rng(7)
        original = rng.integers(0, 256, size=(4, 5, 3), dtype=np.int32)
        deltas = np.zeros_like(original)
        for y in range(4):
            for x in range(5):
                left = original[y, x - 1] if x > 0 else np.zeros(3, dtype=np.int32)
                above = original[y - 1, x] if y > 0 else np.zeros(3, dtype=np.int32)
                corner = (
                    original[y - 1, x - 1] if x > 0 and y > 0 else np.zeros(3, dtype=np.int32)
                )
                prediction = np.clip(left + above - corner, 0, 255)
                deltas[y, x] = (original[y, x] - prediction) & 0xFF
        data = deltas.astype(np.uint8).tobytes()  # 60 bytes >= 12, so compressed
        ctx = CompressionContext()
        compressed = ctx.deflate_tight(3, data)
        payload = bytes([(3 << 4) | 0x40, tightenc.FILTER_GRADIENT]) + tightenc.compact_length(
            len(compressed)
        ) + compressed
        enc = EncodedRect(Rectangle(0, 0, 5, 4), EncodingId.TIGHT, payload)
        grid = decode_rect(enc, CANONICAL_FORMAT, CompressionContext())
        expected = (
            (original[:, :, 0].astype(np.uint32) << 16)
            | (original[:, :, 1].astype(np.uint32) << 8)
            | original[:, :, 2].astype(np.uint32)
        )
        assert np.array_equal(grid, expected)

    def test_jpeg_control_rejected(self):
        enc = EncodedRect(Rectangle(0, 0, 2, 2), EncodingId.TIGHT, bytes([0x90, 0, 0, 0]))
        with pytest.raises(UnknownEncodingError):
            decode_rect(enc, CANONICAL_FORMAT, CompressionContext())

    def test_compact_length_round_trip(self):
        for n in (0, 1, 0x7F, 0x80, 0x3FFF, 0x4000, 0x1FFFFF):
            cur = ByteCursor(tightenc.compact_length(n))
            assert tightenc.read_compact_length(cur) == n
            assert cur.at_end()


class TestSelectEncoding:
    def test_first_supported_preference_wins(self):
        assert select_encoding([7, 5]) == EncodingId.TIGHT

    def test_unknown_ids_fall_back_to_raw(self):
        assert select_encoding([999]) == EncodingId.RAW

    def test_empty_prefs_fall_back_to_raw(self):
        assert select_encoding([]) == EncodingId.RAW

    def test_skips_unknown_then_matches(self):
        assert select_encoding([-239, 999, 5, 7]) == EncodingId.HEXTILE


class TestDecodeDispatch:
    def test_unknown_encoding_id(self):
        enc = EncodedRect(Rectangle(0, 0, 1, 1), 99, b"\x00" * 4)
        with pytest.raises(UnknownEncodingError):
            decode_rect(enc, CANONICAL_FORMAT)

    @pytest.mark.parametrize(
        "encoding", [EncodingId.RAW, EncodingId.RRE, EncodingId.HEXTILE, EncodingId.ZLIB, EncodingId.TIGHT]
    )
    def test_truncation_fuzz_never_crashes(self, rng, encoding):
        fb = random_framebuffer(rng, 24, 20, colors=7)
        rect = full_rect(fb)
        ctx = CompressionContext()
        enc = encode_rect(fb, rect, CANONICAL_FORMAT, encoding, ctx)[0]
        cut_points = sorted(set(int(c) for c in rng.integers(0, len(enc.payload), size=24)))
        for cut in cut_points:
            truncated = EncodedRect(rect, encoding, enc.payload[:cut])
            with pytest.raises((TruncatedPayloadError, MalformedPayloadError)):
                decode_rect(truncated, CANONICAL_FORMAT, CompressionContext())


class TestRawSizeLaw:
    def test_exact_size_for_all_rects(self, rng, wire_format):
        fb = random_framebuffer(rng, 40, 40)
        for _ in range(10):
            x = int(rng.integers(0, 39))
            y = int(rng.integers(0, 39))
            w = int(rng.integers(1, 40 - x + 1))
            h = int(rng.integers(1, 40 - y + 1))
            enc = raw.encode(fb, Rectangle(x, y, w, h), wire_format)
            assert len(enc.payload) == w * h * wire_format.bytes_per_pixel


class TestUniformScreenSizes:
    def test_structured_encodings_beat_raw(self):
        fb = fb_from_grid(np.full((64, 64), 0x00654321, dtype=np.uint32))
        rect = full_rect(fb)
        ctx = CompressionContext()
        sizes = {
            enc: sum(len(e.payload) for e in encode_rect(fb, rect, CANONICAL_FORMAT, enc, ctx))
            for enc in EncodingId
        }
        assert sizes[EncodingId.TIGHT] <= sizes[EncodingId.ZLIB] <= sizes[EncodingId.RAW]
        assert sizes[EncodingId.RRE] <= sizes[EncodingId.RAW]
        assert sizes[EncodingId.HEXTILE] <= sizes[EncodingId.RAW]
        assert sizes[EncodingId.CORRE] <= sizes[EncodingId.RAW]
