"""CoRRE: RRE chunked to at most 255x255 so subrect coordinates fit one byte."""

from __future__ import annotations

import struct

import numpy as np

from ..errors import MalformedPayloadError
from ..pixels import FrameBuffer, PixelFormat, Rectangle, convert_grid
from . import ByteCursor, EncodedRect, EncodingId
from .runs import merged_subrects
from .rre import modal_color, pixel_bytes, read_pixel

MAX_CHUNK = 255


def encode(fb: FrameBuffer, rect: Rectangle, fmt: PixelFormat) -> list[EncodedRect]:
    fb.check_rect(rect)
    out = []
    for cy in range(rect.y, rect.y + rect.h, MAX_CHUNK):
        ch = min(MAX_CHUNK, rect.y + rect.h - cy)
        for cx in range(rect.x, rect.x + rect.w, MAX_CHUNK):
            cw = min(MAX_CHUNK, rect.x + rect.w - cx)
            chunk = Rectangle(cx, cy, cw, ch)
            grid = convert_grid(fb.region(chunk), fb.format, fmt)
            background = modal_color(grid)
            subrects = merged_subrects(grid, background)
            parts = [struct.pack(">I", len(subrects)), pixel_bytes(background, fmt)]
            for color, x, y, w, h in subrects:
                parts.append(pixel_bytes(color, fmt))
                parts.append(struct.pack("BBBB", x, y, w, h))
            out.append(EncodedRect(chunk, EncodingId.CORRE, b"".join(parts)))
    return out


def decode(payload: bytes, w: int, h: int, fmt: PixelFormat) -> np.ndarray:
    if w > MAX_CHUNK or h > MAX_CHUNK:
        raise MalformedPayloadError(f"CoRRE chunk {w}x{h} exceeds {MAX_CHUNK}x{MAX_CHUNK}")
    cur = ByteCursor(payload)
    count = cur.u32()
    background = read_pixel(cur, fmt)
    grid = np.full((h, w), background, dtype=np.uint32)
    for _ in range(count):
        color = read_pixel(cur, fmt)
        sx, sy, sw, sh = struct.unpack("BBBB", cur.take(4))
        if sw < 1 or sh < 1 or sx + sw > w or sy + sh > h:
            raise MalformedPayloadError(f"CoRRE subrect ({sx},{sy},{sw},{sh}) exceeds {w}x{h}")
        grid[sy : sy + sh, sx : sx + sw] = color
    if not cur.at_end():
        raise MalformedPayloadError(f"{cur.remaining()} trailing bytes after CoRRE data")
    return grid
