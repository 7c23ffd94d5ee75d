"""RRE: a background color plus subrectangles for everything else.

Background is the most frequent pixel value in the rect (smallest value on
ties); subrectangles come from greedy row-run extraction with vertical
merging of identical runs.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import MalformedPayloadError
from ..pixels import FrameBuffer, PixelFormat, Rectangle, convert_grid
from . import ByteCursor, EncodedRect, EncodingId
from .runs import merged_subrects


def modal_color(grid: np.ndarray) -> int:
    values, counts = np.unique(grid, return_counts=True)
    return int(values[np.argmax(counts)])


def pixel_bytes(value: int, fmt: PixelFormat) -> bytes:
    return value.to_bytes(fmt.bytes_per_pixel, "big" if fmt.big_endian else "little")


def read_pixel(cur: ByteCursor, fmt: PixelFormat) -> int:
    return int.from_bytes(cur.take(fmt.bytes_per_pixel), "big" if fmt.big_endian else "little")


def encode(fb: FrameBuffer, rect: Rectangle, fmt: PixelFormat) -> EncodedRect:
    grid = convert_grid(fb.region(rect), fb.format, fmt)
    background = modal_color(grid)
    subrects = merged_subrects(grid, background)
    parts = [struct.pack(">I", len(subrects)), pixel_bytes(background, fmt)]
    for color, x, y, w, h in subrects:
        parts.append(pixel_bytes(color, fmt))
        parts.append(struct.pack(">HHHH", x, y, w, h))
    return EncodedRect(rect, EncodingId.RRE, b"".join(parts))


def decode(payload: bytes, w: int, h: int, fmt: PixelFormat) -> np.ndarray:
    cur = ByteCursor(payload)
    count = cur.u32()
    background = read_pixel(cur, fmt)
    grid = np.full((h, w), background, dtype=np.uint32)
    for _ in range(count):
        color = read_pixel(cur, fmt)
        sx, sy, sw, sh = struct.unpack(">HHHH", cur.take(8))
        if sw < 1 or sh < 1 or sx + sw > w or sy + sh > h:
            raise MalformedPayloadError(f"RRE subrect ({sx},{sy},{sw},{sh}) exceeds {w}x{h}")
        grid[sy : sy + sh, sx : sx + sw] = color
    if not cur.at_end():
        raise MalformedPayloadError(f"{cur.remaining()} trailing bytes after RRE data")
    return grid
