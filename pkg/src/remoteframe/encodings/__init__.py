"""Rectangle encodings: Raw, RRE, CoRRE, Hextile, Zlib and Tight.

Every encoder turns (framebuffer, rect, negotiated format) into wire bytes;
every decoder reconstructs the exact pixel grid.  All six encodings here are
lossless.  Multi-byte protocol integers are big-endian; pixel values use the
negotiated format's endianness.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..errors import (
    CompressionFailureError,
    TruncatedPayloadError,
    UnknownEncodingError,
)
from ..pixels import FrameBuffer, PixelFormat, Rectangle
from ..wire import ByteCursor


class EncodingId(IntEnum):
    RAW = 0
    RRE = 2
    CORRE = 4
    HEXTILE = 5
    ZLIB = 6
    TIGHT = 7


SUPPORTED_ENCODINGS = frozenset(EncodingId)


@dataclass(frozen=True)
class EncodedRect:
    """One rectangle header plus encoding-specific payload."""

    rect: Rectangle
    encoding: EncodingId
    payload: bytes


class CompressionContext:
    """Per-session persistent DEFLATE streams.

    One stream backs the Zlib encoding; four back Tight.  Streams live for
    the whole connection and must never be shared across connections; both
    compress and inflate sides are kept here so a session endpoint owns one
    context for its direction.
    """

    TIGHT_STREAMS = 4

    def __init__(self, level: int = zlib.Z_DEFAULT_COMPRESSION):
        self._level = level
        self._zlib_out = None
        self._zlib_in = None
        self._tight_out: list = [None] * self.TIGHT_STREAMS
        self._tight_in: list = [None] * self.TIGHT_STREAMS

    def deflate_zlib(self, data: bytes) -> bytes:
        if self._zlib_out is None:
            self._zlib_out = zlib.compressobj(self._level)
        try:
            return self._zlib_out.compress(data) + self._zlib_out.flush(zlib.Z_SYNC_FLUSH)
        except zlib.error as exc:
            raise CompressionFailureError(str(exc)) from exc

    def inflate_zlib(self, data: bytes, expected: int) -> bytes:
        if self._zlib_in is None:
            self._zlib_in = zlib.decompressobj()
        return self._inflate(self._zlib_in, data, expected)

    def deflate_tight(self, stream: int, data: bytes) -> bytes:
        if self._tight_out[stream] is None:
            self._tight_out[stream] = zlib.compressobj(self._level)
        obj = self._tight_out[stream]
        try:
            return obj.compress(data) + obj.flush(zlib.Z_SYNC_FLUSH)
        except zlib.error as exc:
            raise CompressionFailureError(str(exc)) from exc

    def inflate_tight(self, stream: int, data: bytes, expected: int) -> bytes:
        if self._tight_in[stream] is None:
            self._tight_in[stream] = zlib.decompressobj()
        return self._inflate(self._tight_in[stream], data, expected)

    def reset_tight(self, stream: int) -> None:
        self._tight_out[stream] = None
        self._tight_in[stream] = None

    @staticmethod
    def _inflate(obj, data: bytes, expected: int) -> bytes:
        try:
            out = obj.decompress(data)
        except zlib.error as exc:
            raise TruncatedPayloadError(f"corrupt DEFLATE data: {exc}") from exc
        if len(out) < expected:
            raise TruncatedPayloadError(
                f"DEFLATE stream produced {len(out)} of {expected} expected bytes"
            )
        if len(out) > expected:
            raise TruncatedPayloadError(
                f"DEFLATE stream produced {len(out) - expected} excess bytes"
            )
        return out


def select_encoding(client_prefs: list[int], supported: frozenset[EncodingId] = SUPPORTED_ENCODINGS) -> EncodingId:
    """First client preference the server supports; Raw when nothing matches."""
    supported_values = {int(e) for e in supported}
    for pref in client_prefs:
        if pref in supported_values:
            return EncodingId(pref)
    return EncodingId.RAW


from . import corre, hextile, raw, rre, tightenc, zlibenc  # noqa: E402


def encode_rect(
    fb: FrameBuffer,
    rect: Rectangle,
    fmt: PixelFormat,
    encoding: EncodingId,
    ctx: CompressionContext | None = None,
) -> list[EncodedRect]:
    """Encode one damage rect; CoRRE may fan out into several wire rects."""
    if encoding == EncodingId.RAW:
        return [raw.encode(fb, rect, fmt)]
    if encoding == EncodingId.RRE:
        return [rre.encode(fb, rect, fmt)]
    if encoding == EncodingId.CORRE:
        return corre.encode(fb, rect, fmt)
    if encoding == EncodingId.HEXTILE:
        return [hextile.encode(fb, rect, fmt)]
    if encoding == EncodingId.ZLIB:
        if ctx is None:
            raise ValueError("Zlib encoding requires a CompressionContext")
        return [zlibenc.encode(fb, rect, fmt, ctx)]
    if encoding == EncodingId.TIGHT:
        if ctx is None:
            raise ValueError("Tight encoding requires a CompressionContext")
        return [tightenc.encode(fb, rect, fmt, ctx)]
    raise UnknownEncodingError(f"no encoder for {encoding}")


def decode_rect(
    enc: EncodedRect,
    fmt: PixelFormat,
    ctx: CompressionContext | None = None,
) -> np.ndarray:
    """Reconstruct the (h, w) pixel grid of an encoded rectangle."""
    try:
        encoding = EncodingId(enc.encoding)
    except ValueError:
        raise UnknownEncodingError(f"encoding {enc.encoding} not supported") from None
    if encoding == EncodingId.RAW:
        return raw.decode(enc.payload, enc.rect.w, enc.rect.h, fmt)
    if encoding == EncodingId.RRE:
        return rre.decode(enc.payload, enc.rect.w, enc.rect.h, fmt)
    if encoding == EncodingId.CORRE:
        return corre.decode(enc.payload, enc.rect.w, enc.rect.h, fmt)
    if encoding == EncodingId.HEXTILE:
        return hextile.decode(enc.payload, enc.rect.w, enc.rect.h, fmt)
    if encoding == EncodingId.ZLIB:
        if ctx is None:
            raise ValueError("Zlib decoding requires a CompressionContext")
        return zlibenc.decode(enc.payload, enc.rect.w, enc.rect.h, fmt, ctx)
    if encoding == EncodingId.TIGHT:
        if ctx is None:
            raise ValueError("Tight decoding requires a CompressionContext")
        return tightenc.decode(enc.payload, enc.rect.w, enc.rect.h, fmt, ctx)
    raise UnknownEncodingError(f"no decoder for {encoding}")
