"""Raw encoding: every pixel, left-to-right then top-to-bottom."""

from __future__ import annotations

import numpy as np

from ..pixels import FrameBuffer, PixelFormat, Rectangle, bytes_to_grid, convert_grid, grid_to_bytes
from ..errors import TruncatedPayloadError, MalformedPayloadError
from . import EncodedRect, EncodingId


def encode(fb: FrameBuffer, rect: Rectangle, fmt: PixelFormat) -> EncodedRect:
    grid = convert_grid(fb.region(rect), fb.format, fmt)
    return EncodedRect(rect, EncodingId.RAW, grid_to_bytes(grid, fmt))


def decode(payload: bytes, w: int, h: int, fmt: PixelFormat) -> np.ndarray:
    expected = w * h * fmt.bytes_per_pixel
    if len(payload) < expected:
        raise TruncatedPayloadError(f"raw payload {len(payload)} < {expected}")
    if len(payload) > expected:
        raise MalformedPayloadError(f"raw payload {len(payload)} > {expected}")
    return bytes_to_grid(payload, w, h, fmt)
