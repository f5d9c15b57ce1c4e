"""
Raster image module for the flowerbot inspection toolkit
Handles the RGB frame type, PNG/PPM codecs and dimension adjustment
"""

import io
import re
import struct
import zlib
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Tuple

import numpy as np
import png

from .errors import CorruptStream, ImageTooLarge, UnknownFormat, ZeroDimension, ZeroFactor
from .logger import get_logger

logger = get_logger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PPM_SIGNATURE = b"P6"

# P6 header: magic, width, height, maxval, each preceded by whitespace or comments;
# exactly one whitespace byte before the raster
_PPM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)+(\d+)")

# 8192 x 8192; larger declared sizes are refused before any pixel is allocated
MAX_PIXELS = 1 << 26


class ImageFormat(str, Enum):
    """Supported on-disk encodings."""
    PPM = "ppm"
    PNG = "png"


class PixelCoord(NamedTuple):
    """Column/row address, top-left origin, y grows downward."""
    x: int
    y: int


@dataclass(frozen=True, eq=False)
class RasterImage:
    """
    Immutable 8-bit RGB frame.

    ``pixels`` is a read-only ``uint8`` array of shape ``(height, width, 3)``
    in row-major order.
    """
    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (height, width, 3) pixels, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ZeroDimension(f"image must be at least 1x1, got {arr.shape[1]}x{arr.shape[0]}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("channel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def size(self) -> Tuple[int, int]:
        return self.width, self.height

    def pixel(self, x: int, y: int) -> Tuple[int, int, int]:
        r, g, b = self.pixels[y, x]
        return int(r), int(g), int(b)

    def to_array(self) -> np.ndarray:
        """Writable copy of the pixel buffer."""
        return np.array(self.pixels, copy=True)

    @classmethod
    def filled(cls, width: int, height: int, color: Tuple[int, int, int]) -> "RasterImage":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:, :] = color
        return cls(arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"RasterImage({self.width}x{self.height})"


# ==================== CODECS ====================

def decode_image(data: bytes) -> RasterImage:
    """
    Decode a PNG or binary PPM (P6) byte stream.

    Args:
        data: Complete file contents

    Returns:
        Decoded RasterImage

    Raises:
        UnknownFormat: no recognized signature (including empty input)
        CorruptStream: truncated or invalid payload
        ZeroDimension: header declares a zero width or height
        ImageTooLarge: header declares more than MAX_PIXELS pixels
    """
    data = bytes(data)
    if data.startswith(PNG_SIGNATURE):
        return _decode_png(data)
    if data.startswith(PPM_SIGNATURE):
        return _decode_ppm(data)
    raise UnknownFormat("stream does not start with a PNG or P6 signature")


def encode_image(img: RasterImage, fmt: ImageFormat = ImageFormat.PNG) -> bytes:
    """
    Encode an image losslessly.

    Args:
        img: Image to encode
        fmt: Target format

    Returns:
        Encoded bytes
    """
    fmt = ImageFormat(fmt)
    if fmt is ImageFormat.PPM:
        header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
        return header + img.pixels.tobytes()

    buffer = io.BytesIO()
    writer = png.Writer(img.width, img.height, greyscale=False, bitdepth=8)
    rows = img.pixels.reshape(img.height, img.width * 3)
    writer.write(buffer, (row.tolist() for row in rows))
    return buffer.getvalue()


def format_for_path(path) -> ImageFormat:
    """Pick the codec from a file suffix (``.ppm`` or anything else as PNG)."""
    suffix = str(path).lower().rsplit(".", 1)[-1]
    return ImageFormat.PPM if suffix in ("ppm", "pnm") else ImageFormat.PNG


def _check_budget(width: int, height: int, kind: str) -> None:
    if width * height > MAX_PIXELS:
        raise ImageTooLarge(f"{kind} header declares {width}x{height}, over the {MAX_PIXELS} pixel limit")


def _decode_ppm(data: bytes) -> RasterImage:
    pos = len(PPM_SIGNATURE)
    fields = []
    for _ in range(3):
        match = _PPM_TOKEN.match(data, pos)
        if match is None:
            raise CorruptStream("P6 header is truncated or malformed")
        fields.append(int(match.group(1)))
        pos = match.end()

    width, height, maxval = fields
    if width == 0 or height == 0:
        raise ZeroDimension(f"P6 header declares {width}x{height}")
    _check_budget(width, height, "P6")
    if maxval != 255:
        raise CorruptStream(f"only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise CorruptStream("P6 header must end with a single whitespace byte")
    pos += 1

    expected = width * height * 3
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise CorruptStream(f"P6 payload truncated: {len(payload)} of {expected} bytes")

    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    logger.debug("decoded P6 %dx%d", width, height)
    return RasterImage(arr)


def _decode_png(data: bytes) -> RasterImage:
    # IHDR is always the first chunk: length, type, width, height
    if len(data) < 24 or data[12:16] != b"IHDR":
        raise CorruptStream("PNG stream has no IHDR chunk")
    width, height = struct.unpack(">II", data[16:24])
    if width == 0 or height == 0:
        raise ZeroDimension(f"PNG header declares {width}x{height}")
    _check_budget(width, height, "PNG")

    try:
        width, height, rows, _info = png.Reader(bytes=data).asRGB8()
        arr = np.vstack([np.frombuffer(bytes(row), dtype=np.uint8) for row in rows])
    except (png.Error, ValueError, EOFError, zlib.error) as exc:
        raise CorruptStream(f"invalid PNG payload: {exc}") from exc

    if arr.size != width * height * 3:
        raise CorruptStream("PNG row data does not match the declared size")

    logger.debug("decoded PNG %dx%d", width, height)
    return RasterImage(arr.reshape(height, width, 3))


# ==================== GEOMETRY ====================

def resize_box(img: RasterImage, factor: int) -> RasterImage:
    """
    Downscale by an integer divisor using block means.

    Edge blocks that are cut off by the border average only the pixels
    they contain. Means are rounded to nearest, ties up.

    Args:
        img: Source image
        factor: Block size (1 returns an equal image)

    Returns:
        Image of size ceil(width/factor) x ceil(height/factor)
    """
    if int(factor) != factor or factor < 1:
        raise ZeroFactor(f"resize factor must be a positive integer, got {factor!r}")
    factor = int(factor)
    if factor == 1:
        return img

    src = img.pixels.astype(np.int64)
    row_starts = np.arange(0, img.height, factor)
    col_starts = np.arange(0, img.width, factor)

    sums = np.add.reduceat(np.add.reduceat(src, row_starts, axis=0), col_starts, axis=1)
    rows_per_block = np.diff(np.append(row_starts, img.height))
    cols_per_block = np.diff(np.append(col_starts, img.width))
    counts = np.outer(rows_per_block, cols_per_block)[:, :, None]

    out = (2 * sums + counts) // (2 * counts)
    return RasterImage(out.astype(np.uint8))


def crop(img: RasterImage, roi: Tuple[int, int, int, int]) -> RasterImage:
    """
    Select a rectangular region ``(x, y, w, h)``, clipped to the image.

    Raises:
        ZeroDimension: the clipped region is empty
    """
    x, y, w, h = (int(v) for v in roi)
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + w, img.width), min(y + h, img.height)
    if x1 <= x0 or y1 <= y0:
        raise ZeroDimension(f"region {roi} does not overlap the {img.width}x{img.height} image")
    return RasterImage(img.pixels[y0:y1, x0:x1])


def stretch_contrast(img: RasterImage) -> RasterImage:
    """
    Stretch each channel linearly so its min maps to 0 and its max to 255.

    Channels with a single value are left as they are.
    """
    src = img.pixels.astype(np.int64)
    out = src.copy()
    for channel in range(3):
        plane = src[:, :, channel]
        lo, hi = int(plane.min()), int(plane.max())
        if hi == lo:
            continue
        span = hi - lo
        out[:, :, channel] = (2 * 255 * (plane - lo) + span) // (2 * span)
    return RasterImage(out.astype(np.uint8))
