"""Hextile: 16x16 tiles in raster order, each with a subencoding mask byte.

Mask bits: 1 RawTile, 2 BackgroundSpecified, 4 ForegroundSpecified,
8 AnySubrects, 16 SubrectsColoured.  Background and foreground persist
across tiles until respecified; a raw tile invalidates both and a
coloured-subrects tile invalidates the foreground.  The encoder falls back
to a raw tile whenever the structured form would be larger.
"""

from __future__ import annotations

import numpy as np

from ..errors import MalformedPayloadError
from ..pixels import FrameBuffer, PixelFormat, Rectangle, bytes_to_grid, convert_grid, grid_to_bytes
from . import ByteCursor, EncodedRect, EncodingId
from .rre import pixel_bytes, read_pixel
from .runs import row_runs

TILE = 16

RAW_BIT = 1
BG_BIT = 2
FG_BIT = 4
SUBRECTS_BIT = 8
COLOURED_BIT = 16


def _fg_runs(tile: np.ndarray, fg: int) -> list[tuple[int, int, int]]:
    rows, xs, lengths, colors = row_runs(tile)
    keep = colors == fg
    return list(zip(xs[keep].tolist(), rows[keep].tolist(), lengths[keep].tolist()))


def _coloured_runs(tile: np.ndarray, bg: int) -> list[tuple[int, int, int, int]]:
    rows, xs, lengths, colors = row_runs(tile)
    keep = colors != bg
    return list(
        zip(colors[keep].tolist(), xs[keep].tolist(), rows[keep].tolist(), lengths[keep].tolist())
    )


def encode(fb: FrameBuffer, rect: Rectangle, fmt: PixelFormat) -> EncodedRect:
    grid = convert_grid(fb.region(rect), fb.format, fmt)
    bpp = fmt.bytes_per_pixel
    out = bytearray()
    last_bg: int | None = None
    last_fg: int | None = None

    for ty in range(0, rect.h, TILE):
        th = min(TILE, rect.h - ty)
        for tx in range(0, rect.w, TILE):
            tw = min(TILE, rect.w - tx)
            tile = grid[ty : ty + th, tx : tx + tw]
            raw_size = tw * th * bpp
            values, counts = np.unique(tile, return_counts=True)

            if len(values) == 1:
                color = int(values[0])
                if color == last_bg:
                    out.append(0)
                else:
                    out.append(BG_BIT)
                    out += pixel_bytes(color, fmt)
                    last_bg = color
                continue

            if len(values) == 2:
                bg = int(values[np.argmax(counts)])
                fg = int(values[0] if int(values[1]) == bg else values[1])
                runs = _fg_runs(tile, fg)
                mask = SUBRECTS_BIT
                body = bytearray()
                if bg != last_bg:
                    mask |= BG_BIT
                    body += pixel_bytes(bg, fmt)
                if fg != last_fg:
                    mask |= FG_BIT
                    body += pixel_bytes(fg, fmt)
                body.append(len(runs) & 0xFF)
                for x, y, w in runs:
                    body.append((x << 4) | y)
                    body.append(((w - 1) << 4))
                if len(runs) <= 255 and len(body) <= raw_size:
                    out.append(mask)
                    out += body
                    last_bg, last_fg = bg, fg
                    continue
            else:
                bg = int(values[np.argmax(counts)])
                runs = _coloured_runs(tile, bg)
                mask = SUBRECTS_BIT | COLOURED_BIT
                body = bytearray()
                if bg != last_bg:
                    mask |= BG_BIT
                    body += pixel_bytes(bg, fmt)
                body.append(len(runs) & 0xFF)
                for color, x, y, w in runs:
                    body += pixel_bytes(color, fmt)
                    body.append((x << 4) | y)
                    body.append(((w - 1) << 4))
                if len(runs) <= 255 and len(body) <= raw_size:
                    out.append(mask)
                    out += body
                    last_bg = bg
                    last_fg = None  # coloured subrects leave foreground undefined
                    continue

            # Structured form too large (or too many subrects): raw tile.
            out.append(RAW_BIT)
            out += grid_to_bytes(tile, fmt)
            last_bg = None
            last_fg = None

    return EncodedRect(rect, EncodingId.HEXTILE, bytes(out))


def decode(payload: bytes, w: int, h: int, fmt: PixelFormat) -> np.ndarray:
    cur = ByteCursor(payload)
    bpp = fmt.bytes_per_pixel
    grid = np.zeros((h, w), dtype=np.uint32)
    bg: int | None = None
    fg: int | None = None

    for ty in range(0, h, TILE):
        th = min(TILE, h - ty)
        for tx in range(0, w, TILE):
            tw = min(TILE, w - tx)
            mask = cur.u8()
            if mask & RAW_BIT:
                tile = bytes_to_grid(cur.take(tw * th * bpp), tw, th, fmt)
                grid[ty : ty + th, tx : tx + tw] = tile
                bg = None
                fg = None
                continue
            if mask & BG_BIT:
                bg = read_pixel(cur, fmt)
            if bg is None:
                raise MalformedPayloadError("tile relies on undefined background")
            if mask & FG_BIT:
                fg = read_pixel(cur, fmt)
            tile = np.full((th, tw), bg, dtype=np.uint32)
            if mask & SUBRECTS_BIT:
                count = cur.u8()
                coloured = bool(mask & COLOURED_BIT)
                for _ in range(count):
                    if coloured:
                        color = read_pixel(cur, fmt)
                    else:
                        if fg is None:
                            raise MalformedPayloadError("subrect relies on undefined foreground")
                        color = fg
                    xy = cur.u8()
                    wh = cur.u8()
                    sx, sy = xy >> 4, xy & 0xF
                    sw, sh = (wh >> 4) + 1, (wh & 0xF) + 1
                    if sx + sw > tw or sy + sh > th:
                        raise MalformedPayloadError(
                            f"hextile subrect ({sx},{sy},{sw},{sh}) exceeds {tw}x{th} tile"
                        )
                    tile[sy : sy + sh, sx : sx + sw] = color
                if coloured:
                    fg = None
            grid[ty : ty + th, tx : tx + tw] = tile
    if not cur.at_end():
        raise MalformedPayloadError(f"{cur.remaining()} trailing bytes after hextile tiles")
    return grid
