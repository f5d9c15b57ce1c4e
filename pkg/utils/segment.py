"""
Color segmentation module for the flowerbot inspection toolkit
Classifies pixels against an RGB range and binarizes frames
"""

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch
from .logger import get_logger
from .raster import PixelCoord, RasterImage

logger = get_logger(__name__)

# Raised by the uniformity test on top of the configured dominance
STRICT_DOMINANCE_STEP = Fraction(1, 4)

# Calibration never asks for more than r >= 2*g, 2*b
MAX_CALIBRATED_QUARTERS = 8


@dataclass(frozen=True)
class ColorRange:
    """
    Inclusive per-channel bounds plus an optional red-dominance ratio.

    ``dominance`` f requires r >= f*g and r >= f*b; it is kept as an exact
    fraction so the comparison is done in integers.
    """
    r_min: int = 100
    r_max: int = 255
    g_min: int = 0
    g_max: int = 100
    b_min: int = 0
    b_max: int = 100
    dominance: Optional[Fraction] = Fraction(3, 2)

    def __post_init__(self):
        for lo, hi, name in ((self.r_min, self.r_max, "r"), (self.g_min, self.g_max, "g"),
                             (self.b_min, self.b_max, "b")):
            if not (0 <= lo <= hi <= 255):
                raise ValueError(f"{name} bounds must satisfy 0 <= min <= max <= 255, got [{lo}, {hi}]")
        if self.dominance is not None:
            dominance = Fraction(self.dominance)
            if dominance < 1:
                raise ValueError(f"dominance must be >= 1, got {dominance}")
            object.__setattr__(self, "dominance", dominance)

    def strict(self) -> "ColorRange":
        """Same bounds with dominance raised by 1/4 (unset counts as 1)."""
        base = self.dominance if self.dominance is not None else Fraction(1)
        return replace(self, dominance=base + STRICT_DOMINANCE_STEP)


DEFAULT_RED = ColorRange()


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Row-major foreground flags; True is foreground ("white", one)."""
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True)
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {bits.shape}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    def count(self) -> int:
        return int(self.bits.sum())

    def complement(self) -> "BinaryMask":
        return BinaryMask(~self.bits)

    def issubset(self, other: "BinaryMask") -> bool:
        if self.bits.shape != other.bits.shape:
            raise DimensionMismatch("masks must share a grid")
        return not np.any(self.bits & ~other.bits)

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, set={self.count()})"


def color_test(pixels: np.ndarray, color_range: ColorRange) -> np.ndarray:
    """
    Vectorized range test over an ``(..., 3)`` array of channel values.

    Returns:
        Boolean array with the leading shape of ``pixels``
    """
    px = np.asarray(pixels, dtype=np.int64)
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    hit = ((r >= color_range.r_min) & (r <= color_range.r_max)
           & (g >= color_range.g_min) & (g <= color_range.g_max)
           & (b >= color_range.b_min) & (b <= color_range.b_max))
    if color_range.dominance is not None:
        num, den = color_range.dominance.numerator, color_range.dominance.denominator
        hit &= (r * den >= num * g) & (r * den >= num * b)
    return hit


def classify_pixel(pixel: Tuple[int, int, int], color_range: ColorRange = DEFAULT_RED) -> bool:
    """True iff every channel is within bounds and, when set, red dominates by the ratio."""
    r, g, b = (int(c) for c in pixel)
    if not (color_range.r_min <= r <= color_range.r_max
            and color_range.g_min <= g <= color_range.g_max
            and color_range.b_min <= b <= color_range.b_max):
        return False
    if color_range.dominance is None:
        return True
    num, den = color_range.dominance.numerator, color_range.dominance.denominator
    return r * den >= num * g and r * den >= num * b


def binarize(img: RasterImage, color_range: ColorRange = DEFAULT_RED) -> BinaryMask:
    """
    Set a mask bit exactly where the pixel passes ``classify_pixel``.

    Args:
        img: Filtered frame
        color_range: Selection range

    Returns:
        Mask with the image's dimensions
    """
    mask = BinaryMask(color_test(img.pixels, color_range))
    logger.debug("binarized %dx%d frame: %d foreground pixels", img.width, img.height, mask.count())
    return mask


def calibrate_range(
    img: RasterImage,
    samples: Sequence[PixelCoord],
    margin: int = 20
) -> ColorRange:
    """
    Derive a selection range from representative pixels.

    Args:
        img: Frame the samples were picked from
        samples: Pixel coordinates on the target color
        margin: Amount each channel bound is widened by, clamped to [0, 255]

    Returns:
        ColorRange covering every sample; dominance is the largest k/4 (k >= 4)
        all samples satisfy, or unset when some sample is not red-dominant
    """
    if not samples:
        raise ValueError("at least one sample pixel is required")
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")

    values = []
    for x, y in samples:
        if not (0 <= x < img.width and 0 <= y < img.height):
            raise ValueError(f"sample ({x}, {y}) lies outside the {img.width}x{img.height} image")
        values.append(img.pixel(x, y))
    arr = np.array(values, dtype=np.int64)
    lo = np.clip(arr.min(axis=0) - margin, 0, 255)
    hi = np.clip(arr.max(axis=0) + margin, 0, 255)

    # r*4 >= k*max(g, b) for every sample; samples with g = b = 0 pass any k
    r = arr[:, 0]
    other = np.maximum(arr[:, 1], arr[:, 2])
    positive = other > 0
    k = MAX_CALIBRATED_QUARTERS
    if positive.any():
        k = min(k, int((4 * r[positive] // other[positive]).min()))
    dominance = Fraction(k, 4) if k >= 4 else None

    color_range = ColorRange(int(lo[0]), int(hi[0]), int(lo[1]), int(hi[1]),
                             int(lo[2]), int(hi[2]), dominance)
    logger.info("calibrated range from %d samples: %s", len(samples), color_range)
    return color_range
