"""Run extraction shared by the RRE, CoRRE and Hextile encoders."""

from __future__ import annotations

import numpy as np


def row_runs(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Maximal horizontal runs of equal pixels, never crossing row boundaries.

    Returns parallel arrays (rows, xs, lengths, colors) in raster order.
    """
    h, w = grid.shape
    flat = np.ascontiguousarray(grid).ravel()
    n = flat.size
    starts = np.empty(n, dtype=bool)
    starts[0] = True
    np.not_equal(flat[1:], flat[:-1], out=starts[1:])
    starts[::w] = True
    idx = np.flatnonzero(starts)
    lengths = np.diff(np.append(idx, n))
    return idx // w, idx % w, lengths, flat[idx]


def merged_subrects(grid: np.ndarray, background: int) -> list[tuple[int, int, int, int, int]]:
    """Greedy subrectangle extraction: row runs of non-background pixels,
    merged with the run directly above when x, width and color all match.

    Returns (color, x, y, w, h) tuples covering every non-background pixel
    exactly once.
    """
    rows, xs, lengths, colors = row_runs(grid)
    keep = colors != background
    rows, xs, lengths, colors = rows[keep], xs[keep], lengths[keep], colors[keep]

    out: list[list[int]] = []  # [color, x, y, w, h], mutable while open
    open_by_key: dict[tuple[int, int, int], list[int]] = {}
    current_row = -1
    prev_row_keys: dict[tuple[int, int, int], list[int]] = {}

    for row, x, length, color in zip(
        rows.tolist(), xs.tolist(), lengths.tolist(), colors.tolist()
    ):
        if row != current_row:
            prev_row_keys = open_by_key if row == current_row + 1 else {}
            open_by_key = {}
            current_row = row
        key = (x, length, color)
        prev = prev_row_keys.get(key)
        if prev is not None and prev[2] + prev[4] == row:
            prev[4] += 1
            open_by_key[key] = prev
            del prev_row_keys[key]
        else:
            rect = [color, x, row, length, 1]
            out.append(rect)
            open_by_key[key] = rect
    return [tuple(r) for r in out]
