"""remoteframe: remote control of a simulated mobile device.

An RFB-based screen-sharing server with five negotiable encodings, a binary
command channel for device management, TCP and USB-style transports with
shared-secret authentication, a benchmark harness comparing the encodings,
and a browser viewer bridge.
"""

__version__ = "0.1.0"

from .pixels import CANONICAL_FORMAT, FrameBuffer, PixelFormat, Rectangle, convert_pixel, diff_regions
from .encodings import CompressionContext, EncodedRect, EncodingId, decode_rect, encode_rect, select_encoding

__all__ = [
    "CANONICAL_FORMAT",
    "FrameBuffer",
    "PixelFormat",
    "Rectangle",
    "convert_pixel",
    "diff_regions",
    "CompressionContext",
    "EncodedRect",
    "EncodingId",
    "decode_rect",
    "encode_rect",
    "select_encoding",
]
