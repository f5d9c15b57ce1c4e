"""
Synthetic fixture images used by the tests, the docs and ``scripts/make_fixtures.py``
"""

import numpy as np

from .draw import fill_disc
from .raster import RasterImage

DISC_SIZE = (640, 480)
DISC_RADIUS = 50
DISC_COLOR = (220, 30, 30)

CARNATION_SIZE = (399, 515)


def disc_image(width: int = DISC_SIZE[0], height: int = DISC_SIZE[1], radius: float = DISC_RADIUS,
               color=DISC_COLOR, center=None) -> RasterImage:
    """Red disc on black, centered unless ``center`` is given."""
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    cx, cy = center if center is not None else (width / 2.0, height / 2.0)
    fill_disc(canvas, cx, cy, radius, color)
    return RasterImage(canvas)


def black_image(width: int = 64, height: int = 64) -> RasterImage:
    return RasterImage.filled(width, height, (0, 0, 0))


def carnation_image(seed: int = 7) -> RasterImage:
    """
    399x515 still life: a red carnation head with a few darker petal
    blemishes over a green stem and a noisy grey-green backdrop.
    Deterministic for a given seed.
    """
    width, height = CARNATION_SIZE
    rng = np.random.default_rng(seed)
    canvas = np.empty((height, width, 3), dtype=np.uint8)
    canvas[:, :] = (70, 95, 60)
    noise = rng.integers(-12, 13, size=(height, width, 3))
    canvas[:] = np.clip(canvas.astype(np.int16) + noise, 0, 255).astype(np.uint8)

    # stem
    canvas[260:515, 192:207] = (40, 120, 35)

    # petals: overlapping discs around the head center
    head_x, head_y = 199.5, 190.0
    fill_disc(canvas, head_x, head_y, 78, (205, 25, 45))
    for angle in np.linspace(0.0, 2.0 * np.pi, 12, endpoint=False):
        px = head_x + 62 * np.cos(angle)
        py = head_y + 62 * np.sin(angle)
        fill_disc(canvas, px, py, 26, (225, 35, 55))

    # blemishes
    for _ in range(6):
        bx = head_x + rng.uniform(-45, 45)
        by = head_y + rng.uniform(-45, 45)
        fill_disc(canvas, bx, by, rng.uniform(3, 7), (110, 70, 50))
    return RasterImage(canvas)
