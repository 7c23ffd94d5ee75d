"""The command-channel wire format: length-prefixed binary envelopes.

Envelope layout (all integers big-endian):

    u16 opcode | u32 correlation_id | u32 payload_len | payload

Payload primitives: strings are u32 length + UTF-8, byte blobs are u32
length + raw bytes, lists are u32 count + items.  Error responses use
opcode 0xFFFF and carry u16 error code + message; unsolicited events use
correlation id 0.  The full opcode table and per-opcode schemas live in
docs/protocol.md.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import InvalidArgumentError, MalformedPayloadError, RemoteFrameError
from .wire import ByteCursor

PROTOCOL_VERSION = 1
MAX_PAYLOAD = 64 * 1024 * 1024
FS_CHUNK = 256 * 1024

HEADER = struct.Struct(">HII")

OPCODES: dict[str, int] = {
    "APP_LIST": 0x0101,
    "APP_INSTALL": 0x0102,
    "PROC_LIST": 0x0201,
    "PROC_KILL": 0x0202,
    "SHELL_EXEC": 0x0301,
    "FS_LIST": 0x0401,
    "FS_GET": 0x0402,
    "FS_PUT": 0x0403,
    "FS_REMOVE": 0x0404,
    "STATUS_GET": 0x0501,
    "SENSOR_READ": 0x0601,
    "FIRMWARE_STAGE": 0x0701,
    "INPUT_COMPOSITE": 0x0801,
    "EVENT_ALERT": 0x0F01,
    "ERROR": 0xFFFF,
}

OPCODE_NAMES = {v: k for k, v in OPCODES.items()}

# FS_PUT flag bits
FS_PUT_FIRST = 0x01
FS_PUT_MORE = 0x02


@dataclass(frozen=True)
class CommandEnvelope:
    opcode: int
    correlation_id: int
    payload: bytes = b""

    def serialize(self) -> bytes:
        if len(self.payload) > MAX_PAYLOAD:
            raise InvalidArgumentError(
                f"payload of {len(self.payload)} bytes exceeds the {MAX_PAYLOAD} cap"
            )
        return HEADER.pack(self.opcode, self.correlation_id, len(self.payload)) + self.payload


def parse_envelope_header(header: bytes) -> tuple[int, int, int]:
    opcode, correlation_id, length = HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise MalformedPayloadError(f"declared payload of {length} bytes exceeds the cap")
    return opcode, correlation_id, length


def parse_envelope(data: bytes) -> CommandEnvelope:
    if len(data) < HEADER.size:
        raise MalformedPayloadError("envelope shorter than its header")
    opcode, correlation_id, length = parse_envelope_header(data[: HEADER.size])
    payload = data[HEADER.size :]
    if len(payload) != length:
        raise MalformedPayloadError(f"payload length {len(payload)} != declared {length}")
    return CommandEnvelope(opcode, correlation_id, payload)


async def read_envelope(stream) -> CommandEnvelope:
    header = await stream.read_exactly(HEADER.size)
    opcode, correlation_id, length = parse_envelope_header(header)
    payload = await stream.read_exactly(length) if length else b""
    return CommandEnvelope(opcode, correlation_id, payload)


async def write_envelope(stream, env: CommandEnvelope) -> None:
    await stream.write(env.serialize())


class PayloadWriter:
    """Builds flat binary payloads field by field."""

    def __init__(self):
        self._parts: list[bytes] = []

    def u8(self, v: int) -> "PayloadWriter":
        self._parts.append(bytes([v & 0xFF]))
        return self

    def u16(self, v: int) -> "PayloadWriter":
        self._parts.append(struct.pack(">H", v))
        return self

    def u32(self, v: int) -> "PayloadWriter":
        self._parts.append(struct.pack(">I", v))
        return self

    def u64(self, v: int) -> "PayloadWriter":
        self._parts.append(struct.pack(">Q", v))
        return self

    def i32(self, v: int) -> "PayloadWriter":
        self._parts.append(struct.pack(">i", v))
        return self

    def f64(self, v: float) -> "PayloadWriter":
        self._parts.append(struct.pack(">d", v))
        return self

    def flag(self, v: bool) -> "PayloadWriter":
        return self.u8(1 if v else 0)

    def string(self, v: str) -> "PayloadWriter":
        raw = v.encode("utf-8")
        self._parts.append(struct.pack(">I", len(raw)) + raw)
        return self

    def blob(self, v: bytes) -> "PayloadWriter":
        self._parts.append(struct.pack(">I", len(v)) + v)
        return self

    def done(self) -> bytes:
        return b"".join(self._parts)


class PayloadReader(ByteCursor):
    """Reads the flat binary payload schema; strict about trailing bytes."""

    def flag(self) -> bool:
        return self.u8() != 0

    def string(self) -> str:
        length = self.u32()
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedPayloadError(f"invalid UTF-8 in string field: {exc}") from exc

    def blob(self) -> bytes:
        return self.take(self.u32())

    def finish(self) -> None:
        if not self.at_end():
            raise MalformedPayloadError(f"{self.remaining()} unparsed bytes at payload end")


def error_envelope(correlation_id: int, exc: Exception) -> CommandEnvelope:
    code = exc.code if isinstance(exc, RemoteFrameError) else RemoteFrameError.code
    payload = PayloadWriter().u16(code).string(str(exc)).done()
    return CommandEnvelope(OPCODES["ERROR"], correlation_id, payload)


def parse_error(payload: bytes) -> tuple[int, str]:
    reader = PayloadReader(payload)
    code = reader.u16()
    message = reader.string()
    reader.finish()
    return code, message


def raise_from_error(payload: bytes) -> None:
    """Re-raise a wire error as the matching local exception class."""
    code, message = parse_error(payload)
    for exc_type in RemoteFrameError.__subclasses__():
        if exc_type.code == code:
            raise exc_type(message)
    raise RemoteFrameError(f"remote error {code}: {message}")
