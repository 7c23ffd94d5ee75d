"""Tight encoding: filtered pixel data through four persistent DEFLATE streams.

Control byte: bits 0-3 reset the numbered streams, high nibble 0x8 means
Fill, 0x9 means JPEG (not supported here), anything below 0x8 is Basic with
the stream id in bits 4-5 and bit 6 flagging an explicit filter byte.
Filters: 0 Copy, 1 Palette, 2 Gradient.  Filtered data shorter than 12
bytes travels verbatim; otherwise a compact length (7 bits per byte, high
bit continues) prefixes the compressed bytes.

Encoder policy is deterministic: one color -> Fill, up to 16 colors ->
Palette (1-bit packed rows for two colors, 8-bit indices otherwise, stream
1 or 2), anything else -> Copy on stream 0.  Gradient is decoded but never
produced.

Pixels ride as 3-byte TPIXELs (red, green, blue) when the format is 32 bpp
depth 24 with 8-bit channels; other formats use their normal byte layout.
"""

from __future__ import annotations

import numpy as np

from ..errors import CompressionFailureError, MalformedPayloadError, UnknownEncodingError
from ..pixels import (
    FrameBuffer,
    PixelFormat,
    Rectangle,
    bytes_to_grid,
    convert_grid,
    grid_to_bytes,
    split_channels,
)
from . import ByteCursor, CompressionContext, EncodedRect, EncodingId
from .rre import pixel_bytes, read_pixel

MIN_TO_COMPRESS = 12
MAX_PALETTE = 16

FILTER_COPY = 0
FILTER_PALETTE = 1
FILTER_GRADIENT = 2

STREAM_COPY = 0
STREAM_MONO = 1
STREAM_PALETTE = 2
STREAM_GRADIENT = 3

CONTROL_FILL = 0x80
CONTROL_JPEG = 0x90
EXPLICIT_FILTER = 0x40


def uses_tpixel(fmt: PixelFormat) -> bool:
    return (
        fmt.bits_per_pixel == 32
        and fmt.depth == 24
        and fmt.red_max == 255
        and fmt.green_max == 255
        and fmt.blue_max == 255
    )


def wire_pixel_size(fmt: PixelFormat) -> int:
    return 3 if uses_tpixel(fmt) else fmt.bytes_per_pixel


def _pixel_to_wire(value: int, fmt: PixelFormat) -> bytes:
    if uses_tpixel(fmt):
        r, g, b = fmt.channels(value)
        return bytes((r, g, b))
    return pixel_bytes(value, fmt)


def _read_wire_pixel(cur: ByteCursor, fmt: PixelFormat) -> int:
    if uses_tpixel(fmt):
        r, g, b = cur.take(3)
        return fmt.pack(r, g, b)
    return read_pixel(cur, fmt)


def _grid_to_wire(grid: np.ndarray, fmt: PixelFormat) -> bytes:
    if uses_tpixel(fmt):
        r, g, b = split_channels(grid, fmt)
        return np.stack((r, g, b), axis=-1).astype(np.uint8).tobytes()
    return grid_to_bytes(grid, fmt)


def _wire_to_grid(data: bytes, w: int, h: int, fmt: PixelFormat) -> np.ndarray:
    if uses_tpixel(fmt):
        arr = np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).astype(np.uint32)
        return (arr[:, :, 0] << fmt.red_shift) | (arr[:, :, 1] << fmt.green_shift) | (
            arr[:, :, 2] << fmt.blue_shift
        )
    return bytes_to_grid(data, w, h, fmt)


def compact_length(n: int) -> bytes:
    if n < 0 or n > 0x1FFFFF:
        raise CompressionFailureError(f"length {n} exceeds the 21-bit compact form")
    out = bytearray([n & 0x7F])
    if n > 0x7F:
        out[0] |= 0x80
        out.append((n >> 7) & 0x7F)
        if n > 0x3FFF:
            out[1] |= 0x80
            out.append((n >> 14) & 0x7F)
    return bytes(out)


def read_compact_length(cur: ByteCursor) -> int:
    b0 = cur.u8()
    value = b0 & 0x7F
    if b0 & 0x80:
        b1 = cur.u8()
        value |= (b1 & 0x7F) << 7
        if b1 & 0x80:
            b2 = cur.u8()
            if b2 & 0x80:
                raise MalformedPayloadError("compact length longer than 3 bytes")
            value |= (b2 & 0x7F) << 14
    return value


def _compress(ctx: CompressionContext, stream: int, data: bytes) -> bytes:
    if len(data) < MIN_TO_COMPRESS:
        return data
    compressed = ctx.deflate_tight(stream, data)
    return compact_length(len(compressed)) + compressed


def _pack_mono_rows(indices: np.ndarray) -> bytes:
    # One bit per pixel, MSB first, each row padded to a whole byte.
    return np.packbits(indices.astype(np.uint8), axis=1).tobytes()


def encode(fb: FrameBuffer, rect: Rectangle, fmt: PixelFormat, ctx: CompressionContext) -> EncodedRect:
    grid = convert_grid(fb.region(rect), fb.format, fmt)
    palette = np.unique(grid)

    if len(palette) == 1:
        payload = bytes([CONTROL_FILL]) + _pixel_to_wire(int(palette[0]), fmt)
        return EncodedRect(rect, EncodingId.TIGHT, payload)

    if len(palette) <= MAX_PALETTE:
        indices = np.searchsorted(palette, grid)
        if len(palette) <= 2:
            stream = STREAM_MONO
            data = _pack_mono_rows(indices)
        else:
            stream = STREAM_PALETTE
            data = indices.astype(np.uint8).tobytes()
        header = bytearray([(stream << 4) | EXPLICIT_FILTER, FILTER_PALETTE, len(palette) - 1])
        for color in palette.tolist():
            header += _pixel_to_wire(int(color), fmt)
        payload = bytes(header) + _compress(ctx, stream, data)
        return EncodedRect(rect, EncodingId.TIGHT, payload)

    data = _grid_to_wire(grid, fmt)
    payload = bytes([STREAM_COPY << 4]) + _compress(ctx, STREAM_COPY, data)
    return EncodedRect(rect, EncodingId.TIGHT, payload)


def _read_filtered(cur: ByteCursor, ctx: CompressionContext, stream: int, expected: int) -> bytes:
    if expected < MIN_TO_COMPRESS:
        return cur.take(expected)
    clen = read_compact_length(cur)
    return ctx.inflate_tight(stream, cur.take(clen), expected)


def _undo_gradient(data: bytes, w: int, h: int, fmt: PixelFormat) -> np.ndarray:
    if not uses_tpixel(fmt):
        raise MalformedPayloadError("gradient filter requires the 24-bit pixel form")
    deltas = np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).astype(np.int32)
    out = np.zeros((h, w, 3), dtype=np.int32)
    for y in range(h):
        for x in range(w):
            left = out[y, x - 1] if x > 0 else np.zeros(3, dtype=np.int32)
            above = out[y - 1, x] if y > 0 else np.zeros(3, dtype=np.int32)
            corner = out[y - 1, x - 1] if x > 0 and y > 0 else np.zeros(3, dtype=np.int32)
            prediction = np.clip(left + above - corner, 0, 255)
            out[y, x] = (deltas[y, x] + prediction) & 0xFF
    grid = (
        (out[:, :, 0].astype(np.uint32) << fmt.red_shift)
        | (out[:, :, 1].astype(np.uint32) << fmt.green_shift)
        | (out[:, :, 2].astype(np.uint32) << fmt.blue_shift)
    )
    return grid


def decode(payload: bytes, w: int, h: int, fmt: PixelFormat, ctx: CompressionContext) -> np.ndarray:
    cur = ByteCursor(payload)
    control = cur.u8()
    for i in range(4):
        if control & (1 << i):
            ctx.reset_tight(i)

    if control & 0x80:
        nibble = control >> 4
        if nibble == 0x9:
            raise UnknownEncodingError("Tight JPEG sub-mode is not supported")
        if nibble != 0x8:
            raise MalformedPayloadError(f"invalid Tight control byte 0x{control:02x}")
        color = _read_wire_pixel(cur, fmt)
        if not cur.at_end():
            raise MalformedPayloadError("trailing bytes after Tight fill color")
        return np.full((h, w), color, dtype=np.uint32)

    stream = (control >> 4) & 0x3
    filter_id = cur.u8() if control & EXPLICIT_FILTER else FILTER_COPY

    if filter_id == FILTER_COPY:
        data = _read_filtered(cur, ctx, stream, w * h * wire_pixel_size(fmt))
        grid = _wire_to_grid(data, w, h, fmt)
    elif filter_id == FILTER_PALETTE:
        ncolors = cur.u8() + 1
        palette = np.array([_read_wire_pixel(cur, fmt) for _ in range(ncolors)], dtype=np.uint32)
        if ncolors <= 2:
            row_bytes = (w + 7) // 8
            data = _read_filtered(cur, ctx, stream, row_bytes * h)
            bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8).reshape(h, row_bytes), axis=1)
            indices = bits[:, :w]
        else:
            data = _read_filtered(cur, ctx, stream, w * h)
            indices = np.frombuffer(data, dtype=np.uint8).reshape(h, w)
            if int(indices.max(initial=0)) >= ncolors:
                raise MalformedPayloadError("palette index out of range")
        grid = palette[indices]
    elif filter_id == FILTER_GRADIENT:
        data = _read_filtered(cur, ctx, stream, w * h * 3)
        grid = _undo_gradient(data, w, h, fmt)
    else:
        raise MalformedPayloadError(f"unknown Tight filter {filter_id}")

    if not cur.at_end():
        raise MalformedPayloadError(f"{cur.remaining()} trailing bytes after Tight data")
    return grid
