import numpy as np
import pytest

from remoteframe.pixels import CANONICAL_FORMAT, RGB565_FORMAT, FrameBuffer


def random_framebuffer(rng: np.random.Generator, w: int, h: int, colors: int | None = None) -> FrameBuffer:
    """Framebuffer of random canonical-format pixels; `colors` limits the palette."""
    if colors is None:
        pixels = rng.integers(0, 1 << 24, size=(h, w), dtype=np.uint32)
    else:
        palette = rng.integers(0, 1 << 24, size=colors, dtype=np.uint32)
        pixels = palette[rng.integers(0, colors, size=(h, w))]
    return FrameBuffer(w, h, CANONICAL_FORMAT, pixels)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)


@pytest.fixture(params=[CANONICAL_FORMAT, RGB565_FORMAT], ids=["bpp32", "bpp16"])
def wire_format(request):
    return request.param
