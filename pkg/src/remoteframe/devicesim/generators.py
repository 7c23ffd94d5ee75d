"""Procedural screen generators for the scripted device scenarios.

Every generator is a pure function (params, seed, local time ms) -> pixel
grid, so identical scripts replay to identical bytes on every platform.
Frames draw from a fixed 16-color UI palette with hash-based fine texture
standing in for text; no anti-aliasing anywhere, to keep output pixel-exact.
"""

from __future__ import annotations

import numpy as np

from ..errors import UnknownGeneratorError

# The shared UI palette: 4 light tints, chrome grays, 8 ink colors, 1 accent.
WHITE = 0x00FFFFFF
TINT_COOL = 0x00E9EFF5
TINT_WARM = 0x00F5EFE2
TINT_GREEN = 0x00E4EEE4
LIGHT_GRAY = 0x00DCDCDC
MID_GRAY = 0x009AA0A6
DARK_CHROME = 0x002B2F36
INK_BLACK = 0x001A1A1A
INK_SLATE = 0x003C4450
INK_BLUE = 0x001A4F8B
INK_GREEN = 0x002A6B3F
INK_RED = 0x008B2525
INK_BROWN = 0x006B4A23
INK_PURPLE = 0x005B3A7E
INK_TEAL = 0x001F6B6B
ACCENT_BLUE = 0x003B78D4

TINTS = (WHITE, TINT_COOL, TINT_WARM, TINT_GREEN)
INKS = (INK_BLACK, INK_SLATE, INK_BLUE, INK_GREEN, INK_RED, INK_BROWN, INK_PURPLE, INK_TEAL)

_M1 = np.uint32(0x9E3779B1)
_M2 = np.uint32(0x85EBCA77)
_M3 = np.uint32(0x2C1B3C6D)


def _hash_grid(xs: np.ndarray, ys: np.ndarray, salt: int) -> np.ndarray:
    """Deterministic 2D hash; xs/ys broadcast to the output shape."""
    h = xs.astype(np.uint32) * _M1 ^ ys.astype(np.uint32) * _M2 ^ np.uint32(salt & 0xFFFFFFFF)
    h ^= h >> np.uint32(15)
    h *= _M3
    h ^= h >> np.uint32(12)
    return h


def _hash_int(*parts: int) -> int:
    h = 0x811C9DC5
    for p in parts:
        h = ((h ^ (p & 0xFFFFFFFF)) * 0x01000193) & 0xFFFFFFFF
    h ^= h >> 15
    return h


def _textured_block(x0: int, y0: int, w: int, h: int, salt: int, density: int = 4) -> np.ndarray:
    """Boolean mask of 'inked' pixels; density/8 of the block is on."""
    if w <= 0 or h <= 0:
        return np.zeros((max(h, 0), max(w, 0)), dtype=bool)
    ys = np.arange(y0, y0 + h, dtype=np.uint32)[:, None]
    xs = np.arange(x0, x0 + w, dtype=np.uint32)[None, :]
    return (_hash_grid(xs, ys, salt) & np.uint32(7)) < np.uint32(density)


_chrome_cache: dict = {}
_pattern_cache: dict = {}
_static_cache: dict = {}

BAND_ROWS = 16
BROWSER_CHROME_ROWS = 64


def _browser_chrome(seed: int, width: int) -> np.ndarray:
    key = (seed, width)
    if key not in _chrome_cache:
        chrome = np.full((BROWSER_CHROME_ROWS, width), DARK_CHROME, dtype=np.uint32)
        # address field with text-like texture
        chrome[16:48, 12 : max(13, width - 12)] = LIGHT_GRAY
        text_w = width - 120
        if text_w > 0:
            mask = _textured_block(20, 24, text_w, 16, _hash_int(seed, 0xADD2))
            chrome[24:40, 20 : 20 + text_w][mask] = INK_SLATE
        if width >= 96:
            chrome[24:40, width - 60 : width - 24] = MID_GRAY
        _chrome_cache[key] = chrome
    return _chrome_cache[key]


def _content_band(seed: int, width: int, band: int) -> np.ndarray:
    """One 16-row slice of the endless page: tinted line band with glyph
    blocks of fine 2-4 px texture, plus sparse speckles between them."""
    h = _hash_int(seed, band, 0xBA2D)
    tint = TINTS[h & 3]
    out = np.full((BAND_ROWS, width), tint, dtype=np.uint32)
    margin = 16
    nblocks = 5 + ((h >> 4) & 7)  # 5..12 glyph blocks per line
    span = width - 2 * margin
    abs_y = band * BAND_ROWS
    ys = np.arange(abs_y, abs_y + BAND_ROWS, dtype=np.uint32)[:, None]

    # sparse speckle ink across the whole band breaks up long tint runs
    xs_all = np.arange(width, dtype=np.uint32)[None, :]
    speckle = (_hash_grid(xs_all, ys, _hash_int(seed, 0x5EC)) & np.uint32(31)) < np.uint32(2)
    out[speckle] = INKS[(h >> 13) & 7]

    x = margin + (h >> 7) % 24
    for i in range(nblocks):
        bh = _hash_int(seed, band, i, 0x6711)
        bw = 12 + (bh & 31)  # 12..43 px wide
        if x + bw > margin + span:
            break
        ink = INKS[(bh >> 5) & 7]
        mask = _textured_block(x, abs_y + 4, bw, 10, _hash_int(seed, band, i, 0x7E47), density=4)
        region = out[4:14, x : x + bw]
        region[mask] = ink
        x += bw + 6 + ((bh >> 8) & 15)
    return out


def _scroll_pattern(seed: int, width: int, rows_needed: int) -> np.ndarray:
    """Endless page content, grown band-by-band and cached per (seed, width)."""
    key = (seed, width)
    cached = _pattern_cache.get(key)
    have = 0 if cached is None else cached.shape[0]
    if have < rows_needed:
        bands_needed = (rows_needed + BAND_ROWS - 1) // BAND_ROWS
        new = [_content_band(seed, width, b) for b in range(have // BAND_ROWS, bands_needed)]
        cached = np.vstack(([cached] if cached is not None else []) + new)
        _pattern_cache[key] = cached
    return cached


def home(params: dict, seed: int, t_ms: int) -> np.ndarray:
    w, h = params["width"], params["height"]
    icons = int(params.get("icons", 20))
    key = ("home", seed, w, h, icons)
    if key not in _static_cache:
        frame = np.empty((h, w), dtype=np.uint32)
        # two-tint diagonal wallpaper bands
        ys = np.arange(h)[:, None]
        xs = np.arange(w)[None, :]
        frame[:] = np.where(((xs + ys) // 80) % 2 == 0, TINT_COOL, TINT_GREEN)
        frame[0:24] = DARK_CHROME
        clock_x = max(4, w - 80)
        clock_w = max(8, min(64, w - clock_x - 8))
        clock_mask = _textured_block(clock_x, 4, clock_w, 16, _hash_int(seed, 0xC10C))
        frame[4:20, clock_x : clock_x + clock_w][clock_mask] = WHITE

        cols = 4
        rows = (icons + cols - 1) // cols
        cell_w = (w - 32) // cols
        cell_h = min(140, (h - 64) // max(rows, 1))
        # icon glyph: 9x9 coarse cells scaled to the cell, two inks, no AA
        scale = max(1, min(cell_w - 8, cell_h - 24) // 9)
        icon_px = 9 * scale
        for i in range(icons):
            cx = 16 + (i % cols) * cell_w
            cy = 40 + (i // cols) * cell_h
            ih = _hash_int(seed, i, 0x1C0)
            body = INKS[ih & 7]
            accent = INKS[(ih >> 3) & 7]
            x0 = cx + (cell_w - icon_px) // 2
            cells = (_hash_grid(
                np.arange(9, dtype=np.uint32)[None, :],
                np.arange(9, dtype=np.uint32)[:, None],
                _hash_int(seed, i, 0x1C1),
            ) & np.uint32(3))
            icon = np.where(cells < 2, body, np.where(cells == 2, accent, WHITE)).astype(np.uint32)
            frame[cy : cy + icon_px, x0 : x0 + icon_px] = np.kron(
                icon, np.ones((scale, scale), dtype=np.uint32)
            )
            ly = cy + icon_px + 6
            lw = min(icon_px + 16, cell_w)
            lx = cx + (cell_w - lw) // 2
            if ly + 8 <= h:
                label = _textured_block(lx, ly, lw, 8, _hash_int(seed, i, 0x1C2), density=3)
                frame[ly : ly + 8, lx : lx + lw][label] = INK_SLATE
        _static_cache[key] = frame
    return _static_cache[key].copy()


def browser_scroll(params: dict, seed: int, t_ms: int) -> np.ndarray:
    w, h = params["width"], params["height"]
    velocity = int(params.get("velocity", 160))  # px/s downward
    offset = (velocity * t_ms) // 1000
    content_rows = h - BROWSER_CHROME_ROWS
    pattern = _scroll_pattern(seed, w, offset + content_rows)
    frame = np.empty((h, w), dtype=np.uint32)
    frame[:BROWSER_CHROME_ROWS] = _browser_chrome(seed, w)
    frame[BROWSER_CHROME_ROWS:] = pattern[offset : offset + content_rows]
    return frame


MUSIC_BAND_TOP = 0.875  # progress band sits at 7/8 of the screen height
MUSIC_BAND_ROWS = 40


def _music_chrome(seed: int, w: int, h: int) -> np.ndarray:
    key = ("music", seed, w, h)
    if key not in _static_cache:
        frame = np.full((h, w), TINT_WARM, dtype=np.uint32)
        frame[0:64] = DARK_CHROME
        title = _textured_block(16, 20, w // 2, 24, _hash_int(seed, 0x717E))
        frame[20:44, 16 : 16 + w // 2][title] = WHITE
        # album art: big two-ink textured square
        art = min(w - 96, (h * 2) // 5)
        if art > 0:
            ax = (w - art) // 2
            mask = _textured_block(ax, 120, art, art, _hash_int(seed, 0xA27))
            frame[120 : 120 + art, ax : ax + art] = INK_TEAL
            frame[120 : 120 + art, ax : ax + art][mask] = INK_BLUE
        # transport controls
        by = 120 + max(art, 0) + 48
        if by + 64 < int(h * MUSIC_BAND_TOP):
            for i, x in enumerate((w // 2 - 120, w // 2 - 32, w // 2 + 56)):
                if x < 0 or x + 64 > w:
                    continue
                frame[by : by + 64, x : x + 64] = MID_GRAY
                glyph = _textured_block(x + 12, by + 12, 40, 40, _hash_int(seed, i, 0xB7), density=3)
                frame[by + 12 : by + 52, x + 12 : x + 52][glyph] = INK_BLACK
        _static_cache[key] = frame
    return _static_cache[key]


def music_player(params: dict, seed: int, t_ms: int) -> np.ndarray:
    w, h = params["width"], params["height"]
    track_ms = int(params.get("track_ms", 30000))
    frame = _music_chrome(seed, w, h).copy()
    band_y = int(h * MUSIC_BAND_TOP)
    tick = t_ms // 16  # the band animates at frame rate
    frame[band_y : band_y + MUSIC_BAND_ROWS, 8 : max(9, w - 8)] = LIGHT_GRAY
    fill = ((w - 16) * (t_ms % track_ms)) // track_ms
    if fill > 0:
        frame[band_y + 34 : band_y + 38, 8 : 8 + fill] = ACCENT_BLUE
    # elapsed-time readout with centisecond digits
    digits = _textured_block(16, band_y + 2, 56, 6, _hash_int(seed, tick, 0xD16), density=4)
    frame[band_y + 2 : band_y + 8, 16 : 72][digits] = INK_BLACK
    # spectrum visualizer: colored bars bouncing every frame
    bars_x = 96
    nbars = (w - bars_x - 16) // 6
    for i in range(max(nbars, 0)):
        bh = _hash_int(seed, i, tick, 0x5BA2)
        height = 2 + bh % 28
        x = bars_x + i * 6
        frame[band_y + 30 - height : band_y + 30, x : x + 5] = INKS[(bh >> 8) & 7]
    return frame


TRANSITION_LEVELS = 8


def transition(params: dict, seed: int, t_ms: int) -> np.ndarray:
    """Crossfade between the previous step's last frame and the next step's
    first frame, quantized to 8 blend levels."""
    duration = int(params["duration_ms"])
    from_id, from_params, from_time = params["from"]
    to_id, to_params, to_time = params["to"]
    a = GENERATORS[from_id](from_params, seed, from_time)
    b = GENERATORS[to_id](to_params, seed, to_time)
    q = min(TRANSITION_LEVELS - 1, (t_ms * TRANSITION_LEVELS) // duration)
    if q == 0:
        return a
    if q == TRANSITION_LEVELS - 1:
        return b
    out = np.uint32(0)
    result = np.zeros_like(a)
    for shift in (16, 8, 0):
        ca = ((a >> shift) & 0xFF).astype(np.int32)
        cb = ((b >> shift) & 0xFF).astype(np.int32)
        blended = (ca + ((cb - ca) * q) // (TRANSITION_LEVELS - 1)).astype(np.uint32)
        result |= blended << shift
    return result + out


GENERATORS = {
    "home": home,
    "browser_scroll": browser_scroll,
    "music_player": music_player,
    "transition": transition,
}


def builtin_generators() -> dict:
    return dict(GENERATORS)


def get_generator(name: str):
    try:
        return GENERATORS[name]
    except KeyError:
        raise UnknownGeneratorError(f"no generator named {name!r}") from None
