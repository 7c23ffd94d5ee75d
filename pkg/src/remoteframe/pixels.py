"""Pixel formats, framebuffers, rectangles and dirty-region detection.

Pixel values are plain unsigned integers regardless of bits-per-pixel;
byte layout (width and endianness) is applied only when a value crosses
the wire.  Framebuffer contents live in a numpy uint32 array of shape
(height, width).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, OutOfBoundsError

MAX_DIMENSION = 0xFFFF  # protocol carries width/height as u16


def _is_mask(v: int) -> bool:
    # 2^k - 1 for some k >= 1
    return v > 0 and (v & (v + 1)) == 0


@dataclass(frozen=True)
class PixelFormat:
    """A true-color pixel layout as negotiated on the wire."""

    bits_per_pixel: int
    depth: int
    big_endian: bool
    true_color: bool
    red_max: int
    green_max: int
    blue_max: int
    red_shift: int
    green_shift: int
    blue_shift: int

    def __post_init__(self):
        if self.bits_per_pixel not in (8, 16, 32):
            raise ValueError(f"bits_per_pixel must be 8, 16 or 32, got {self.bits_per_pixel}")
        if not 1 <= self.depth <= self.bits_per_pixel:
            raise ValueError(f"depth {self.depth} outside 1..{self.bits_per_pixel}")
        if not self.true_color:
            raise ValueError("color-map formats are not supported")
        masks = []
        for name, cmax, shift in (
            ("red", self.red_max, self.red_shift),
            ("green", self.green_max, self.green_shift),
            ("blue", self.blue_max, self.blue_shift),
        ):
            if not _is_mask(cmax):
                raise ValueError(f"{name}_max {cmax} is not 2^k - 1")
            if shift < 0 or (cmax << shift) >= (1 << self.bits_per_pixel):
                raise ValueError(f"{name} channel does not fit in {self.bits_per_pixel} bits")
            masks.append(cmax << shift)
        if (masks[0] & masks[1]) or (masks[0] & masks[2]) or (masks[1] & masks[2]):
            raise ValueError("channel masks overlap")

    @property
    def bytes_per_pixel(self) -> int:
        return self.bits_per_pixel // 8

    def dtype(self) -> np.dtype:
        base = {8: "u1", 16: "u2", 32: "u4"}[self.bits_per_pixel]
        return np.dtype((">" if self.big_endian else "<") + base)

    def pack(self, r: int, g: int, b: int) -> int:
        """Build a pixel value from channel intensities (already scaled to the maxes)."""
        return (r << self.red_shift) | (g << self.green_shift) | (b << self.blue_shift)

    def channels(self, value: int) -> tuple[int, int, int]:
        return (
            (value >> self.red_shift) & self.red_max,
            (value >> self.green_shift) & self.green_max,
            (value >> self.blue_shift) & self.blue_max,
        )


# All scenario generators emit this format; conversion happens at the
# protocol edge when a client negotiates something else.
CANONICAL_FORMAT = PixelFormat(
    bits_per_pixel=32,
    depth=24,
    big_endian=False,
    true_color=True,
    red_max=255,
    green_max=255,
    blue_max=255,
    red_shift=16,
    green_shift=8,
    blue_shift=0,
)

RGB565_FORMAT = PixelFormat(
    bits_per_pixel=16,
    depth=16,
    big_endian=False,
    true_color=True,
    red_max=31,
    green_max=63,
    blue_max=31,
    red_shift=11,
    green_shift=5,
    blue_shift=0,
)


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned region inside a framebuffer; w and h are at least 1."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"degenerate rectangle {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError("rectangle position must be non-negative")
        if self.x + self.w > MAX_DIMENSION + 1 or self.y + self.h > MAX_DIMENSION + 1:
            raise ValueError("rectangle exceeds protocol coordinate range")

    @property
    def area(self) -> int:
        return self.w * self.h

    def contains(self, other: "Rectangle") -> bool:
        return (
            other.x >= self.x
            and other.y >= self.y
            and other.x + other.w <= self.x + self.w
            and other.y + other.h <= self.y + self.h
        )

    def intersect(self, other: "Rectangle") -> "Rectangle | None":
        x0 = max(self.x, other.x)
        y0 = max(self.y, other.y)
        x1 = min(self.x + self.w, other.x + other.w)
        y1 = min(self.y + self.h, other.y + other.h)
        if x1 <= x0 or y1 <= y0:
            return None
        return Rectangle(x0, y0, x1 - x0, y1 - y0)


class FrameBuffer:
    """A width x height pixel surface holding values in a given format."""

    __slots__ = ("width", "height", "format", "pixels")

    def __init__(self, width: int, height: int, format: PixelFormat, pixels: np.ndarray | None = None):
        if not 1 <= width <= MAX_DIMENSION or not 1 <= height <= MAX_DIMENSION:
            raise ValueError(f"framebuffer size {width}x{height} out of range")
        if pixels is None:
            pixels = np.zeros((height, width), dtype=np.uint32)
        else:
            pixels = np.ascontiguousarray(pixels, dtype=np.uint32)
            if pixels.shape != (height, width):
                raise DimensionMismatchError(
                    f"pixel array shape {pixels.shape} does not match {height}x{width}"
                )
        self.width = width
        self.height = height
        self.format = format
        self.pixels = pixels

    def bounds(self) -> Rectangle:
        return Rectangle(0, 0, self.width, self.height)

    def check_rect(self, rect: Rectangle) -> None:
        if rect.x + rect.w > self.width or rect.y + rect.h > self.height:
            raise OutOfBoundsError(
                f"rect {rect} outside {self.width}x{self.height} framebuffer"
            )

    def region(self, rect: Rectangle) -> np.ndarray:
        """Read-only view of the rect's pixels, shape (h, w)."""
        self.check_rect(rect)
        return self.pixels[rect.y : rect.y + rect.h, rect.x : rect.x + rect.w]

    def copy(self) -> "FrameBuffer":
        return FrameBuffer(self.width, self.height, self.format, self.pixels.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameBuffer):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.format == other.format
            and bool(np.array_equal(self.pixels, other.pixels))
        )


def convert_pixel(value: int, src: PixelFormat, dst: PixelFormat) -> int:
    """Rescale each channel as round(c * dst_max / src_max) and repack."""
    if src == dst:
        return value
    r, g, b = src.channels(value)
    r = (r * dst.red_max + src.red_max // 2) // src.red_max
    g = (g * dst.green_max + src.green_max // 2) // src.green_max
    b = (b * dst.blue_max + src.blue_max // 2) // src.blue_max
    return dst.pack(r, g, b)


def convert_grid(grid: np.ndarray, src: PixelFormat, dst: PixelFormat) -> np.ndarray:
    """Vectorized convert_pixel over a (h, w) uint32 array."""
    if src == dst:
        return grid
    out = np.zeros_like(grid, dtype=np.uint64)
    for s_shift, s_max, d_shift, d_max in (
        (src.red_shift, src.red_max, dst.red_shift, dst.red_max),
        (src.green_shift, src.green_max, dst.green_shift, dst.green_max),
        (src.blue_shift, src.blue_max, dst.blue_shift, dst.blue_max),
    ):
        chan = (grid >> s_shift) & s_max
        scaled = (chan.astype(np.uint64) * d_max + s_max // 2) // s_max
        out |= scaled << d_shift
    return out.astype(np.uint32)


def split_channels(grid: np.ndarray, fmt: PixelFormat) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        (grid >> fmt.red_shift) & fmt.red_max,
        (grid >> fmt.green_shift) & fmt.green_max,
        (grid >> fmt.blue_shift) & fmt.blue_max,
    )


def grid_to_bytes(grid: np.ndarray, fmt: PixelFormat) -> bytes:
    """Serialize a (h, w) pixel grid row-major in the format's byte layout."""
    return np.ascontiguousarray(grid).astype(fmt.dtype()).tobytes()


def bytes_to_grid(data: bytes, w: int, h: int, fmt: PixelFormat) -> np.ndarray:
    expected = w * h * fmt.bytes_per_pixel
    if len(data) != expected:
        raise DimensionMismatchError(f"need {expected} bytes for {w}x{h}, got {len(data)}")
    flat = np.frombuffer(data, dtype=fmt.dtype()).astype(np.uint32)
    return flat.reshape(h, w)


def diff_regions(prev: FrameBuffer, next: FrameBuffer, tile: int = 16) -> list[Rectangle]:
    """Tile-aligned damage rectangles covering every pixel where prev != next.

    Dirty tiles are merged into horizontal runs per tile row, then runs with
    identical x-extent in adjacent rows merge vertically.  The result is
    pairwise disjoint and clipped to the framebuffer.
    """
    if tile < 1:
        raise ValueError("tile must be >= 1")
    if (prev.width, prev.height) != (next.width, next.height) or prev.format != next.format:
        raise DimensionMismatchError("framebuffers differ in size or format")

    w, h = prev.width, prev.height
    changed = prev.pixels != next.pixels
    if not changed.any():
        return []

    tiles_x = (w + tile - 1) // tile
    tiles_y = (h + tile - 1) // tile
    # Pad up to the tile grid, then reduce each tile block to a single flag.
    padded = np.zeros((tiles_y * tile, tiles_x * tile), dtype=bool)
    padded[:h, :w] = changed
    dirty = padded.reshape(tiles_y, tile, tiles_x, tile).any(axis=(1, 3))

    # Horizontal runs of dirty tiles per tile row.
    runs: list[tuple[int, int, int]] = []  # (ty, tx_start, tx_len)
    for ty in range(tiles_y):
        row = dirty[ty]
        tx = 0
        while tx < tiles_x:
            if row[tx]:
                start = tx
                while tx < tiles_x and row[tx]:
                    tx += 1
                runs.append((ty, start, tx - start))
            else:
                tx += 1

    # Merge vertically adjacent runs with the same horizontal extent.
    open_runs: dict[tuple[int, int], tuple[int, int]] = {}  # (tx, len) -> (ty0, ty_last)
    rects: list[Rectangle] = []

    def emit(tx: int, tlen: int, ty0: int, ty1: int) -> None:
        x = tx * tile
        y = ty0 * tile
        rects.append(
            Rectangle(x, y, min(tlen * tile, w - x), min((ty1 - ty0 + 1) * tile, h - y))
        )

    for ty, tx, tlen in runs:
        key = (tx, tlen)
        if key in open_runs and open_runs[key][1] == ty - 1:
            open_runs[key] = (open_runs[key][0], ty)
        else:
            if key in open_runs:
                emit(tx, tlen, *open_runs[key])
            open_runs[key] = (ty, ty)
    for (tx, tlen), (ty0, ty1) in open_runs.items():
        emit(tx, tlen, ty0, ty1)
    rects.sort(key=lambda r: (r.y, r.x))
    return rects
