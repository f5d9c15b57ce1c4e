"""
Binary morphology module for the flowerbot inspection toolkit
Implements erosion, dilation, opening and closing with arbitrary structuring elements
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .filter import MaskShape, Rect, shape_grid, validate_grid
from .logger import get_logger
from .segment import BinaryMask

logger = get_logger(__name__)

MORPH_OPERATIONS = ("open", "close", "erode", "dilate")


@dataclass(frozen=True, eq=False)
class StructuringElement:
    """Odd-sized boolean neighborhood anchored at its (active) center cell."""
    active: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "active", validate_grid(self.active))

    @classmethod
    def from_shape(cls, shape: MaskShape) -> "StructuringElement":
        return cls(shape_grid(shape))

    @property
    def width(self) -> int:
        return int(self.active.shape[1])

    @property
    def height(self) -> int:
        return int(self.active.shape[0])

    @property
    def radius(self) -> Tuple[int, int]:
        """Half-extent as (rx, ry)."""
        return self.width // 2, self.height // 2

    def offsets(self) -> List[Tuple[int, int]]:
        """Active cells as (dx, dy) relative to the anchor."""
        rx, ry = self.radius
        ys, xs = np.nonzero(self.active)
        return [(int(x) - rx, int(y) - ry) for y, x in zip(ys, xs)]

    def reflect(self) -> "StructuringElement":
        """Point reflection through the anchor."""
        return StructuringElement(self.active[::-1, ::-1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StructuringElement):
            return NotImplemented
        return np.array_equal(self.active, other.active)

    def __repr__(self) -> str:
        return f"StructuringElement({self.width}x{self.height}, active={int(self.active.sum())})"


DEFAULT_SE = StructuringElement.from_shape(Rect(3, 3))


def pad_mask(m: BinaryMask, border_x: int, border_y: Optional[int] = None) -> BinaryMask:
    """Surround a mask with a background border."""
    border_y = border_x if border_y is None else border_y
    return BinaryMask(np.pad(m.bits, ((border_y, border_y), (border_x, border_x)), constant_values=False))


def erode(m: BinaryMask, se: StructuringElement = DEFAULT_SE) -> BinaryMask:
    """
    Keep (x, y) iff every active SE cell (dx, dy) lands on a set bit at
    (x+dx, y+dy). Cells outside the frame count as background.
    """
    rx, ry = se.radius
    h, w = m.height, m.width
    padded = np.pad(m.bits, ((ry, ry), (rx, rx)), constant_values=False)
    out = np.ones((h, w), dtype=bool)
    for dx, dy in se.offsets():
        out &= padded[ry + dy:ry + dy + h, rx + dx:rx + dx + w]
    return BinaryMask(out)


def dilate(m: BinaryMask, se: StructuringElement = DEFAULT_SE) -> BinaryMask:
    """
    Set (x, y) iff some active SE cell (dx, dy) satisfies m(x-dx, y-dy),
    i.e. the reflected element hits the foreground. Clipped at the frame.
    """
    rx, ry = se.radius
    h, w = m.height, m.width
    padded = np.pad(m.bits, ((ry, ry), (rx, rx)), constant_values=False)
    out = np.zeros((h, w), dtype=bool)
    for dx, dy in se.offsets():
        out |= padded[ry - dy:ry - dy + h, rx - dx:rx - dx + w]
    return BinaryMask(out)


def opening(m: BinaryMask, se: StructuringElement = DEFAULT_SE) -> BinaryMask:
    """Erode then dilate: removes specks smaller than the element."""
    return dilate(erode(m, se), se)


def closing(m: BinaryMask, se: StructuringElement = DEFAULT_SE) -> BinaryMask:
    """
    Dilate then erode: fills pinholes and gaps smaller than the element.

    Evaluated on a background-padded copy and cropped back, so the result
    matches closing the mask as if the frame continued with background. This
    keeps closing extensive for blobs touching the border.
    """
    rx, ry = se.radius
    padded = pad_mask(m, rx, ry)
    closed = erode(dilate(padded, se), se)
    return BinaryMask(closed.bits[ry:ry + m.height, rx:rx + m.width])


_DISPATCH = {
    "open": opening,
    "close": closing,
    "erode": erode,
    "dilate": dilate,
}


def parse_sequence(text: str) -> Tuple[str, ...]:
    """Parse a comma list such as ``open,close``; an empty string means no morphology."""
    ops = tuple(op.strip().lower() for op in (text or "").split(",") if op.strip())
    unknown = [op for op in ops if op not in _DISPATCH]
    if unknown:
        raise ConfigError(f"unknown morphology operation(s) {unknown}; expected any of {MORPH_OPERATIONS}")
    return ops


def apply_sequence(m: BinaryMask, se: StructuringElement, ops: Iterable[str]) -> BinaryMask:
    """Run the named operations left to right."""
    for op in ops:
        if op not in _DISPATCH:
            raise ConfigError(f"unknown morphology operation {op!r}")
        before = m.count()
        m = _DISPATCH[op](m, se)
        logger.debug("%s: %d -> %d foreground pixels", op, before, m.count())
    return m
