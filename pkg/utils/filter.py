"""
Mean filter module for the flowerbot inspection toolkit
Implements the averaging low-pass filter with circular or rectangular masks
"""

import re
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from .errors import ConfigError, EmptyKernel, EvenDimension
from .logger import get_logger
from .raster import RasterImage

logger = get_logger(__name__)


@dataclass(frozen=True)
class Circular:
    """Disc mask: cells with dx^2 + dy^2 <= radius^2."""
    radius: int

    def __str__(self) -> str:
        return f"circular:{self.radius}"


@dataclass(frozen=True)
class Rect:
    """Solid rectangular mask."""
    width: int
    height: int

    def __str__(self) -> str:
        return f"rect:{self.width}x{self.height}"


MaskShape = Union[Circular, Rect]

_SHAPE_PATTERN = re.compile(r"^\s*(circular|rect)\s*:\s*(\d+)(?:\s*x\s*(\d+))?\s*$", re.IGNORECASE)


def parse_shape(text: str) -> MaskShape:
    """
    Parse ``circular:R`` or ``rect:WxH`` (``rect:N`` means NxN).

    Raises:
        ConfigError: unrecognized text
    """
    match = _SHAPE_PATTERN.match(text or "")
    if match is None:
        raise ConfigError(f"mask must look like 'circular:5' or 'rect:5x5', got {text!r}")
    kind, first, second = match.groups()
    if kind.lower() == "circular":
        if second is not None:
            raise ConfigError(f"circular mask takes a single radius, got {text!r}")
        return Circular(int(first))
    return Rect(int(first), int(second if second is not None else first))


def shape_grid(shape: MaskShape) -> np.ndarray:
    """
    Boolean grid of the cells a mask shape covers.

    Raises:
        EvenDimension: rectangle with an even side
        ValueError: negative radius or non-positive side
    """
    if isinstance(shape, Circular):
        r = int(shape.radius)
        if r < 0:
            raise ValueError(f"radius must be >= 0, got {r}")
        d = np.arange(-r, r + 1)
        return d[None, :] ** 2 + d[:, None] ** 2 <= r * r
    if isinstance(shape, Rect):
        w, h = int(shape.width), int(shape.height)
        if w < 1 or h < 1:
            raise ValueError(f"rectangle sides must be >= 1, got {w}x{h}")
        if w % 2 == 0 or h % 2 == 0:
            raise EvenDimension(f"rectangle sides must be odd, got {w}x{h}")
        return np.ones((h, w), dtype=bool)
    raise TypeError(f"unsupported mask shape {shape!r}")


def validate_grid(active: np.ndarray) -> np.ndarray:
    """Check the odd-size, active-anchor invariants and return a read-only bool copy."""
    grid = np.array(active, dtype=bool, copy=True)
    if grid.ndim != 2:
        raise ValueError(f"grid must be 2-D, got shape {grid.shape}")
    h, w = grid.shape
    if h % 2 == 0 or w % 2 == 0:
        raise EvenDimension(f"grid sides must be odd, got {w}x{h}")
    if not grid[h // 2, w // 2]:
        raise EmptyKernel("anchor (center) cell must be active")
    grid.setflags(write=False)
    return grid


@dataclass(frozen=True, eq=False)
class Kernel:
    """Unweighted averaging mask; the anchor is the center cell."""
    active: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "active", validate_grid(self.active))

    @property
    def width(self) -> int:
        return int(self.active.shape[1])

    @property
    def height(self) -> int:
        return int(self.active.shape[0])

    @property
    def active_count(self) -> int:
        return int(self.active.sum())

    def row_runs(self) -> List[Tuple[int, int, int]]:
        """Active cells as (row, first_col, last_col) runs of consecutive columns."""
        runs = []
        for row in range(self.height):
            cols = np.flatnonzero(self.active[row])
            if cols.size == 0:
                continue
            breaks = np.flatnonzero(np.diff(cols) > 1)
            starts = np.concatenate(([cols[0]], cols[breaks + 1]))
            ends = np.concatenate((cols[breaks], [cols[-1]]))
            runs.extend((row, int(a), int(b)) for a, b in zip(starts, ends))
        return runs

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Kernel):
            return NotImplemented
        return np.array_equal(self.active, other.active)

    def __repr__(self) -> str:
        return f"Kernel({self.width}x{self.height}, active={self.active_count})"


def make_kernel(shape: MaskShape) -> Kernel:
    """
    Build an averaging kernel.

    Args:
        shape: Circular(radius) or Rect(width, height)

    Returns:
        Kernel on a (2r+1)x(2r+1) grid holding the disc cells, or a full rectangle
    """
    return Kernel(shape_grid(shape))


def mean_filter(img: RasterImage, kernel: Kernel) -> RasterImage:
    """
    Average each channel over the kernel's active cells.

    Out-of-frame cells take the value of the nearest edge pixel. Sums are
    exact integers built from per-row prefix sums, and each output value is
    rounded to nearest with ties going up.

    Args:
        img: Source image
        kernel: Averaging mask

    Returns:
        Filtered image with the same dimensions
    """
    if kernel.active_count == 1:
        return img

    ry, rx = kernel.height // 2, kernel.width // 2
    h, w = img.height, img.width
    padded = np.pad(img.pixels.astype(np.int64), ((ry, ry), (rx, rx), (0, 0)), mode="edge")

    # prefix[:, j] holds the sum of padded columns [0, j)
    prefix = np.zeros((padded.shape[0], padded.shape[1] + 1, 3), dtype=np.int64)
    np.cumsum(padded, axis=1, out=prefix[:, 1:])

    total = np.zeros((h, w, 3), dtype=np.int64)
    for row, first, last in kernel.row_runs():
        band = prefix[row:row + h]
        total += band[:, last + 1:last + 1 + w] - band[:, first:first + w]

    n = kernel.active_count
    out = (2 * total + n) // (2 * n)
    logger.debug("mean filter %r over %dx%d", kernel, w, h)
    return RasterImage(out.astype(np.uint8))
