"""RFB 3.8 session machinery: handshake, negotiation, the update
request/response loop and input events.

The server pins protocol version 3.8 and speaks two security types: 1
(None) and 113 (the shared-secret MAC challenge).  Updates follow the
deferred-update contract: an empty incremental diff holds the reply until
the screen changes; non-incremental requests always answer immediately.
"""

from __future__ import annotations

import asyncio
import struct
from dataclasses import dataclass

from . import auth as auth_mod
from .auth import AuthPolicy
from .encodings import CompressionContext, EncodedRect, EncodingId, encode_rect, select_encoding
from .encodings import tightenc
from .errors import (
    AuthFailedError,
    MalformedPayloadError,
    OutOfBoundsError,
    VersionMismatchError,
)
from .pixels import CANONICAL_FORMAT, FrameBuffer, PixelFormat, Rectangle, diff_regions

PROTOCOL_VERSION = b"RFB 003.008\n"
SERVER_NAME = b"remoteframe-sim"

SECURITY_NONE = 1
SECURITY_MAC = 113

SECURITY_RESULT_OK = 0
SECURITY_RESULT_FAILED = 1

MSG_SET_PIXEL_FORMAT = 0
MSG_SET_ENCODINGS = 2
MSG_FB_UPDATE_REQUEST = 3
MSG_KEY_EVENT = 4
MSG_POINTER_EVENT = 5

MSG_FB_UPDATE = 0  # server -> client

# Large rects get split into bands for the stream encodings so palettes stay
# local and the client sees steady progress (Tight/Zlib rect counts balloon
# accordingly).
STREAM_SPLIT_AREA = 32768

PIXEL_FORMAT_STRUCT = struct.Struct(">BBBBHHHBBB3x")


def pixel_format_block(fmt: PixelFormat) -> bytes:
    return PIXEL_FORMAT_STRUCT.pack(
        fmt.bits_per_pixel,
        fmt.depth,
        1 if fmt.big_endian else 0,
        1 if fmt.true_color else 0,
        fmt.red_max,
        fmt.green_max,
        fmt.blue_max,
        fmt.red_shift,
        fmt.green_shift,
        fmt.blue_shift,
    )


def parse_pixel_format_block(block: bytes) -> PixelFormat:
    bpp, depth, big_endian, true_color, rmax, gmax, bmax, rshift, gshift, bshift = (
        PIXEL_FORMAT_STRUCT.unpack(block)
    )
    if not true_color:
        raise MalformedPayloadError("color-map pixel formats are not supported")
    if bpp not in (16, 32):
        raise MalformedPayloadError(f"client pixel formats must be 16 or 32 bpp, got {bpp}")
    try:
        return PixelFormat(bpp, depth, bool(big_endian), True, rmax, gmax, bmax, rshift, gshift, bshift)
    except ValueError as exc:
        raise MalformedPayloadError(f"invalid pixel format: {exc}") from exc


def server_init_message(width: int, height: int, fmt: PixelFormat, name: bytes = SERVER_NAME) -> bytes:
    return (
        struct.pack(">HH", width, height)
        + pixel_format_block(fmt)
        + struct.pack(">I", len(name))
        + name
    )


@dataclass(frozen=True)
class InputEvent:
    kind: str  # "pointer" | "key"
    x: int = 0
    y: int = 0
    buttons: int = 0
    keysym: int = 0
    down: bool = False


class Session:
    """Per-client RFB state: negotiated format, encoding preferences,
    compression streams and the last framebuffer the client has seen."""

    def __init__(
        self,
        width: int,
        height: int,
        *,
        peer: str = "?",
        defer_empty_updates: bool = True,
    ):
        self.width = width
        self.height = height
        self.peer = peer
        self.format = CANONICAL_FORMAT
        self.encoding_prefs: list[int] = []
        self.encoding = EncodingId.RAW
        self.compression = CompressionContext()
        self.last_sent: FrameBuffer | None = None
        self.pending_request: tuple[Rectangle, bool] | None = None
        self.defer_empty_updates = defer_empty_updates

    def set_encodings(self, prefs: list[int]) -> None:
        self.encoding_prefs = list(prefs)
        self.encoding = select_encoding(prefs)

    def set_pixel_format(self, fmt: PixelFormat) -> None:
        self.format = fmt

    def _split_for_encoding(self, rect: Rectangle) -> list[Rectangle]:
        if self.encoding not in (EncodingId.ZLIB, EncodingId.TIGHT):
            return [rect]
        band_rows = max(1, STREAM_SPLIT_AREA // max(rect.w, 1))
        if rect.h <= band_rows:
            return [rect]
        return [
            Rectangle(rect.x, y, rect.w, min(band_rows, rect.y + rect.h - y))
            for y in range(rect.y, rect.y + rect.h, band_rows)
        ]

    def build_update(
        self, current: FrameBuffer, area: Rectangle, incremental: bool
    ) -> bytes | None:
        """Encode one FramebufferUpdate, or None when the reply is deferred."""
        screen = Rectangle(0, 0, current.width, current.height)
        if not screen.contains(area):
            raise OutOfBoundsError(f"requested area {area} outside {screen}")

        if not incremental or self.last_sent is None:
            damage = [area]
        else:
            damage = []
            for rect in diff_regions(self.last_sent, current):
                clipped = rect.intersect(area)
                if clipped is not None:
                    damage.append(clipped)
            if not damage:
                if self.defer_empty_updates:
                    return None
                self.last_sent = current
                return update_message([])

        encoded: list[EncodedRect] = []
        for rect in damage:
            for band in self._split_for_encoding(rect):
                encoded.extend(
                    encode_rect(current, band, self.format, self.encoding, self.compression)
                )
        self.last_sent = current
        return update_message(encoded)


def update_message(rects: list[EncodedRect]) -> bytes:
    parts = [struct.pack(">BxH", MSG_FB_UPDATE, len(rects))]
    for enc in rects:
        r = enc.rect
        parts.append(struct.pack(">HHHHi", r.x, r.y, r.w, r.h, int(enc.encoding)))
        parts.append(enc.payload)
    return b"".join(parts)


def inject_input(session: Session, event: InputEvent, device) -> None:
    if event.kind == "pointer":
        device.log_pointer(event.x, event.y, event.buttons)
    elif event.kind == "key":
        device.log_key(event.keysym, event.down)
    else:
        raise MalformedPayloadError(f"unknown input event kind {event.kind!r}")


# --- handshake --------------------------------------------------------------


def _version_tuple(version_line: bytes) -> tuple[int, int]:
    try:
        if not version_line.startswith(b"RFB ") or version_line[11:12] != b"\n":
            raise ValueError
        return int(version_line[4:7]), int(version_line[8:11])
    except ValueError:
        raise VersionMismatchError(f"malformed version line {version_line!r}") from None


async def server_handshake(
    stream,
    policy: AuthPolicy,
    width: int,
    height: int,
    *,
    peer: str = "?",
    name: bytes = SERVER_NAME,
    nonce_source=None,
    defer_empty_updates: bool = True,
) -> tuple[Session, object]:
    """Version exchange, security, ClientInit/ServerInit.  Returns the
    session plus the (possibly rewrapped) stream to keep using."""
    await stream.write(PROTOCOL_VERSION)
    client_version = await asyncio.wait_for(stream.read_exactly(12), auth_mod.AUTH_TIMEOUT_S)
    if _version_tuple(client_version) < (3, 8):
        reason = b"server requires protocol version 3.8"
        await stream.write(bytes([0]) + struct.pack(">I", len(reason)) + reason)
        await stream.close()
        raise VersionMismatchError(f"client offered {client_version!r}")

    offered = SECURITY_MAC if policy.mode == "shared_secret" else SECURITY_NONE
    await stream.write(bytes([1, offered]))
    chosen = (await asyncio.wait_for(stream.read_exactly(1), auth_mod.AUTH_TIMEOUT_S))[0]
    if chosen != offered:
        await _security_failure(stream, b"unsupported security type")
        raise AuthFailedError(f"client chose security type {chosen}, offered {offered}")

    nonce = b""
    if offered == SECURITY_MAC:
        kwargs = {"nonce_source": nonce_source} if nonce_source else {}
        ok, nonce = await auth_mod.server_mac_challenge(
            stream, policy.secret, auth_mod.CHANNEL_RFB, **kwargs
        )
        if not ok:
            await _security_failure(stream, b"authentication failed")
            raise AuthFailedError(f"bad MAC from {peer}")
    await stream.write(struct.pack(">I", SECURITY_RESULT_OK))

    if policy.encrypt_channel:
        stream = auth_mod.encrypted_server_side(stream, policy.secret, nonce, auth_mod.CHANNEL_RFB)

    await asyncio.wait_for(stream.read_exactly(1), auth_mod.AUTH_TIMEOUT_S)  # ClientInit shared flag
    await stream.write(server_init_message(width, height, CANONICAL_FORMAT, name))
    session = Session(width, height, peer=peer, defer_empty_updates=defer_empty_updates)
    return session, stream


async def _security_failure(stream, reason: bytes) -> None:
    await stream.write(
        struct.pack(">I", SECURITY_RESULT_FAILED) + struct.pack(">I", len(reason)) + reason
    )
    await stream.close()


async def client_handshake(
    stream, secret: bytes | None = None, *, shared: bool = True, encrypt: bool = False
):
    """Client side of the handshake; returns (width, height, fmt, name, stream)."""
    server_version = await stream.read_exactly(12)
    if _version_tuple(server_version) != (3, 8):
        raise VersionMismatchError(f"server offered {server_version!r}")
    await stream.write(PROTOCOL_VERSION)
    count = (await stream.read_exactly(1))[0]
    if count == 0:
        reason_len = struct.unpack(">I", await stream.read_exactly(4))[0]
        reason = await stream.read_exactly(reason_len)
        raise VersionMismatchError(f"server refused handshake: {reason.decode()}")
    types = await stream.read_exactly(count)
    nonce = b""
    if SECURITY_MAC in types and secret is not None:
        await stream.write(bytes([SECURITY_MAC]))
        nonce = await auth_mod.client_mac_response(stream, secret, auth_mod.CHANNEL_RFB)
    elif SECURITY_NONE in types:
        await stream.write(bytes([SECURITY_NONE]))
    else:
        raise AuthFailedError(f"no usable security type in {list(types)}")
    result = struct.unpack(">I", await stream.read_exactly(4))[0]
    if result != SECURITY_RESULT_OK:
        reason_len = struct.unpack(">I", await stream.read_exactly(4))[0]
        reason = await stream.read_exactly(reason_len)
        raise AuthFailedError(reason.decode(errors="replace"))
    if encrypt:
        if secret is None:
            raise AuthFailedError("channel encryption needs the shared secret")
        stream = auth_mod.encrypted_client_side(stream, secret, nonce, auth_mod.CHANNEL_RFB)
    await stream.write(bytes([1 if shared else 0]))
    width, height = struct.unpack(">HH", await stream.read_exactly(4))
    fmt = parse_pixel_format_block(await stream.read_exactly(16))
    name_len = struct.unpack(">I", await stream.read_exactly(4))[0]
    name = await stream.read_exactly(name_len)
    return width, height, fmt, name, stream


# --- client message parsing (server side) ------------------------------------


@dataclass(frozen=True)
class UpdateRequestMessage:
    area: Rectangle
    incremental: bool


@dataclass(frozen=True)
class SetEncodingsMessage:
    encodings: list[int]


@dataclass(frozen=True)
class SetPixelFormatMessage:
    format: PixelFormat


async def read_client_message(stream):
    """Parse one client-to-server message into a typed object."""
    msg_type = (await stream.read_exactly(1))[0]
    if msg_type == MSG_SET_PIXEL_FORMAT:
        await stream.read_exactly(3)
        return SetPixelFormatMessage(parse_pixel_format_block(await stream.read_exactly(16)))
    if msg_type == MSG_SET_ENCODINGS:
        await stream.read_exactly(1)
        (count,) = struct.unpack(">H", await stream.read_exactly(2))
        raw = await stream.read_exactly(4 * count)
        return SetEncodingsMessage(list(struct.unpack(f">{count}i", raw)) if count else [])
    if msg_type == MSG_FB_UPDATE_REQUEST:
        incremental = (await stream.read_exactly(1))[0] != 0
        x, y, w, h = struct.unpack(">HHHH", await stream.read_exactly(8))
        if w < 1 or h < 1:
            raise MalformedPayloadError(f"degenerate update request {w}x{h}")
        return UpdateRequestMessage(Rectangle(x, y, w, h), incremental)
    if msg_type == MSG_KEY_EVENT:
        down = (await stream.read_exactly(1))[0] != 0
        await stream.read_exactly(2)
        (keysym,) = struct.unpack(">I", await stream.read_exactly(4))
        return InputEvent("key", keysym=keysym, down=down)
    if msg_type == MSG_POINTER_EVENT:
        buttons = (await stream.read_exactly(1))[0]
        x, y = struct.unpack(">HH", await stream.read_exactly(4))
        return InputEvent("pointer", x=x, y=y, buttons=buttons)
    raise MalformedPayloadError(f"unknown client message type {msg_type}")


# --- client-side update parsing ----------------------------------------------


def set_encodings_message(prefs: list[int]) -> bytes:
    body = struct.pack(f">{len(prefs)}i", *prefs) if prefs else b""
    return struct.pack(">BxH", MSG_SET_ENCODINGS, len(prefs)) + body


def update_request_message(area: Rectangle, incremental: bool) -> bytes:
    return struct.pack(
        ">BBHHHH", MSG_FB_UPDATE_REQUEST, 1 if incremental else 0, area.x, area.y, area.w, area.h
    )


def pointer_event_message(x: int, y: int, buttons: int) -> bytes:
    return struct.pack(">BBHH", MSG_POINTER_EVENT, buttons, x, y)


def key_event_message(keysym: int, down: bool) -> bytes:
    return struct.pack(">BBxxI", MSG_KEY_EVENT, 1 if down else 0, keysym)


async def _read_raw_payload(stream, rect: Rectangle, fmt: PixelFormat) -> bytes:
    return await stream.read_exactly(rect.w * rect.h * fmt.bytes_per_pixel)


async def _read_rre_payload(stream, rect, fmt, coord_bytes: int) -> bytes:
    head = await stream.read_exactly(4 + fmt.bytes_per_pixel)
    count = struct.unpack(">I", head[:4])[0]
    body = await stream.read_exactly(count * (fmt.bytes_per_pixel + coord_bytes))
    return head + body


async def _read_hextile_payload(stream, rect: Rectangle, fmt: PixelFormat) -> bytes:
    bpp = fmt.bytes_per_pixel
    out = bytearray()
    for ty in range(0, rect.h, 16):
        th = min(16, rect.h - ty)
        for tx in range(0, rect.w, 16):
            tw = min(16, rect.w - tx)
            mask = await stream.read_exactly(1)
            out += mask
            if mask[0] & 1:
                out += await stream.read_exactly(tw * th * bpp)
                continue
            if mask[0] & 2:
                out += await stream.read_exactly(bpp)
            if mask[0] & 4:
                out += await stream.read_exactly(bpp)
            if mask[0] & 8:
                count_b = await stream.read_exactly(1)
                out += count_b
                per = (bpp + 2) if mask[0] & 16 else 2
                out += await stream.read_exactly(count_b[0] * per)
    return bytes(out)


async def _read_zlib_payload(stream, rect, fmt) -> bytes:
    head = await stream.read_exactly(4)
    (length,) = struct.unpack(">I", head)
    return head + await stream.read_exactly(length)


async def _read_compact_length(stream) -> tuple[int, bytes]:
    raw = bytearray(await stream.read_exactly(1))
    value = raw[0] & 0x7F
    if raw[0] & 0x80:
        raw += await stream.read_exactly(1)
        value |= (raw[1] & 0x7F) << 7
        if raw[1] & 0x80:
            raw += await stream.read_exactly(1)
            value |= (raw[2] & 0x7F) << 14
    return value, bytes(raw)


async def _read_tight_payload(stream, rect: Rectangle, fmt: PixelFormat) -> bytes:
    control_b = await stream.read_exactly(1)
    control = control_b[0]
    out = bytearray(control_b)
    psz = tightenc.wire_pixel_size(fmt)
    if control & 0x80:
        if (control >> 4) == 0x9:
            raise MalformedPayloadError("Tight JPEG sub-mode is not supported")
        out += await stream.read_exactly(psz)
        return bytes(out)
    filter_id = tightenc.FILTER_COPY
    if control & 0x40:
        filter_b = await stream.read_exactly(1)
        out += filter_b
        filter_id = filter_b[0]
    if filter_id == tightenc.FILTER_COPY:
        expected = rect.w * rect.h * psz
    elif filter_id == tightenc.FILTER_PALETTE:
        ncolors_b = await stream.read_exactly(1)
        out += ncolors_b
        ncolors = ncolors_b[0] + 1
        out += await stream.read_exactly(ncolors * psz)
        expected = ((rect.w + 7) // 8) * rect.h if ncolors <= 2 else rect.w * rect.h
    elif filter_id == tightenc.FILTER_GRADIENT:
        expected = rect.w * rect.h * 3
    else:
        raise MalformedPayloadError(f"unknown Tight filter {filter_id}")
    if expected < tightenc.MIN_TO_COMPRESS:
        out += await stream.read_exactly(expected)
    else:
        length, raw = await _read_compact_length(stream)
        out += raw
        out += await stream.read_exactly(length)
    return bytes(out)


async def read_encoded_rect(stream, fmt: PixelFormat) -> EncodedRect:
    """Read one rect header + payload off the wire (client side)."""
    header = await stream.read_exactly(12)
    x, y, w, h, encoding = struct.unpack(">HHHHi", header)
    rect = Rectangle(x, y, w, h)
    if encoding == EncodingId.RAW:
        payload = await _read_raw_payload(stream, rect, fmt)
    elif encoding == EncodingId.RRE:
        payload = await _read_rre_payload(stream, rect, fmt, 8)
    elif encoding == EncodingId.CORRE:
        payload = await _read_rre_payload(stream, rect, fmt, 4)
    elif encoding == EncodingId.HEXTILE:
        payload = await _read_hextile_payload(stream, rect, fmt)
    elif encoding == EncodingId.ZLIB:
        payload = await _read_zlib_payload(stream, rect, fmt)
    elif encoding == EncodingId.TIGHT:
        payload = await _read_tight_payload(stream, rect, fmt)
    else:
        raise MalformedPayloadError(f"cannot size unknown encoding {encoding}")
    return EncodedRect(rect, EncodingId(encoding), payload)


async def read_update_message(stream, fmt: PixelFormat) -> list[EncodedRect]:
    header = await stream.read_exactly(4)
    if header[0] != MSG_FB_UPDATE:
        raise MalformedPayloadError(f"expected FramebufferUpdate, got type {header[0]}")
    (count,) = struct.unpack(">H", header[2:4])
    return [await read_encoded_rect(stream, fmt) for _ in range(count)]
