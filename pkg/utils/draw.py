"""
Drawing primitives shared by the renderer, the annotator and the fixtures.

All functions paint into a writable ``(height, width, 3)`` uint8 array in
place and clip silently at the borders.
"""

from typing import Tuple

import numpy as np

Color = Tuple[int, int, int]


def fill_disc(canvas: np.ndarray, cx: float, cy: float, radius: float, color: Color) -> int:
    """
    Fill every pixel whose coordinate (x, y) satisfies
    (x - cx)^2 + (y - cy)^2 <= radius^2.

    Returns:
        Number of pixels painted
    """
    height, width = canvas.shape[:2]
    if radius < 0:
        return 0
    x0 = max(int(np.floor(cx - radius)), 0)
    x1 = min(int(np.ceil(cx + radius)), width - 1)
    y0 = max(int(np.floor(cy - radius)), 0)
    y1 = min(int(np.ceil(cy + radius)), height - 1)
    if x1 < x0 or y1 < y0:
        return 0

    ys, xs = np.ogrid[y0:y1 + 1, x0:x1 + 1]
    inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius
    canvas[y0:y1 + 1, x0:x1 + 1][inside] = color
    return int(inside.sum())


def outline_rect(canvas: np.ndarray, x_min: int, y_min: int, x_max: int, y_max: int, color: Color) -> None:
    """One-pixel rectangle outline with inclusive corners."""
    height, width = canvas.shape[:2]
    x0, x1 = max(x_min, 0), min(x_max, width - 1)
    y0, y1 = max(y_min, 0), min(y_max, height - 1)
    if x1 < x0 or y1 < y0:
        return
    if 0 <= y_min < height:
        canvas[y_min, x0:x1 + 1] = color
    if 0 <= y_max < height:
        canvas[y_max, x0:x1 + 1] = color
    if 0 <= x_min < width:
        canvas[y0:y1 + 1, x_min] = color
    if 0 <= x_max < width:
        canvas[y0:y1 + 1, x_max] = color


def cross(canvas: np.ndarray, x: int, y: int, arm: int, color: Color) -> None:
    """Plus-shaped marker spanning 2*arm+1 pixels along each axis."""
    height, width = canvas.shape[:2]
    if 0 <= y < height:
        canvas[y, max(x - arm, 0):min(x + arm, width - 1) + 1] = color
    if 0 <= x < width:
        canvas[max(y - arm, 0):min(y + arm, height - 1) + 1, x] = color
