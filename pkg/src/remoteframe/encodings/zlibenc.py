"""Zlib encoding: raw pixel bytes through one persistent DEFLATE stream.

Payload is a big-endian u32 length followed by RFC 1950 stream bytes,
flushed at every rect so the peer's persistent inflater stays in sync.
"""

from __future__ import annotations

import struct

import numpy as np

from ..pixels import FrameBuffer, PixelFormat, Rectangle, bytes_to_grid, convert_grid, grid_to_bytes
from . import ByteCursor, CompressionContext, EncodedRect, EncodingId


def encode(fb: FrameBuffer, rect: Rectangle, fmt: PixelFormat, ctx: CompressionContext) -> EncodedRect:
    grid = convert_grid(fb.region(rect), fb.format, fmt)
    compressed = ctx.deflate_zlib(grid_to_bytes(grid, fmt))
    return EncodedRect(rect, EncodingId.ZLIB, struct.pack(">I", len(compressed)) + compressed)


def decode(payload: bytes, w: int, h: int, fmt: PixelFormat, ctx: CompressionContext) -> np.ndarray:
    cur = ByteCursor(payload)
    length = cur.u32()
    compressed = cur.take(length)
    raw = ctx.inflate_zlib(compressed, w * h * fmt.bytes_per_pixel)
    return bytes_to_grid(raw, w, h, fmt)
