"""Shared-secret channel authentication.

The server issues a 16-byte random nonce; the client answers with
HMAC-SHA256(secret, nonce || channel-kind byte).  The secret itself never
crosses the wire, replayed MACs die with the nonce, and the kind byte stops
a MAC captured on one channel type from opening the other.
"""

from __future__ import annotations

import asyncio
import hashlib
import hmac
import os
from dataclasses import dataclass

CHANNEL_RFB = 0x01
CHANNEL_CMD = 0x02

NONCE_LEN = 16
MAC_LEN = 32
AUTH_TIMEOUT_S = 5.0
FAIL_DELAY_S = 0.2  # uniform, success-independent


@dataclass(frozen=True)
class AuthPolicy:
    mode: str  # "none" | "shared_secret"
    secret: bytes = b""
    encrypt_channel: bool = False

    def __post_init__(self):
        if self.mode not in ("none", "shared_secret"):
            raise ValueError(f"unknown auth mode {self.mode!r}")
        if self.mode == "shared_secret" and not self.secret:
            raise ValueError("shared_secret mode requires a non-empty secret")
        if self.encrypt_channel and self.mode != "shared_secret":
            raise ValueError("channel encryption requires shared_secret auth")

    @classmethod
    def open(cls) -> "AuthPolicy":
        return cls("none")

    @classmethod
    def shared_secret(cls, secret: bytes, encrypt_channel: bool = False) -> "AuthPolicy":
        return cls("shared_secret", secret, encrypt_channel)


def compute_mac(secret: bytes, nonce: bytes, channel_kind: int) -> bytes:
    return hmac.new(secret, nonce + bytes([channel_kind]), hashlib.sha256).digest()


async def server_mac_challenge(
    stream, secret: bytes, channel_kind: int, *, nonce_source=os.urandom
) -> tuple[bool, bytes]:
    """Run the challenge; returns (ok, nonce).  The caller reports the result
    in whatever framing its channel uses and closes on failure."""
    nonce = nonce_source(NONCE_LEN)
    await stream.write(nonce)
    mac = await asyncio.wait_for(stream.read_exactly(MAC_LEN), AUTH_TIMEOUT_S)
    expected = compute_mac(secret, nonce, channel_kind)
    ok = hmac.compare_digest(mac, expected)
    if not ok:
        await asyncio.sleep(FAIL_DELAY_S)
    return ok, nonce


async def client_mac_response(stream, secret: bytes, channel_kind: int) -> bytes:
    nonce = await asyncio.wait_for(stream.read_exactly(NONCE_LEN), AUTH_TIMEOUT_S)
    mac = compute_mac(secret, nonce, channel_kind)
    await stream.write(mac)
    return nonce


def derive_channel_keys(secret: bytes, nonce: bytes, channel_kind: int):
    """Per-direction AES-CTR key/IV material for the optional channel cipher."""

    def block(label: bytes, size: int) -> bytes:
        return hmac.new(
            secret, label + nonce + bytes([channel_kind]), hashlib.sha256
        ).digest()[:size]

    return {
        "s2c_key": block(b"key:s2c:", 32),
        "s2c_iv": block(b"iv:s2c:", 16),
        "c2s_key": block(b"key:c2s:", 32),
        "c2s_iv": block(b"iv:c2s:", 16),
    }


def encrypted_server_side(stream, secret: bytes, nonce: bytes, channel_kind: int):
    from .streams import EncryptedStream

    keys = derive_channel_keys(secret, nonce, channel_kind)
    return EncryptedStream(stream, keys["s2c_key"], keys["s2c_iv"], keys["c2s_key"], keys["c2s_iv"])


def encrypted_client_side(stream, secret: bytes, nonce: bytes, channel_kind: int):
    from .streams import EncryptedStream

    keys = derive_channel_keys(secret, nonce, channel_kind)
    return EncryptedStream(stream, keys["c2s_key"], keys["c2s_iv"], keys["s2c_key"], keys["s2c_iv"])
