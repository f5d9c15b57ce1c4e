"""
Blob analysis module for the flowerbot inspection toolkit
Labels connected components and measures area, perimeter, centroid and bounding box
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import UnknownLabel
from .logger import get_logger
from .segment import BinaryMask

logger = get_logger(__name__)


class Connectivity(IntEnum):
    """Pixel adjacency used for labeling."""
    FOUR = 4
    EIGHT = 8

    def structure(self) -> np.ndarray:
        return ndimage.generate_binary_structure(2, 1 if self is Connectivity.FOUR else 2)


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel bounds."""
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1


@dataclass(frozen=True)
class Blob:
    """
    One connected component.

    ``perimeter`` counts unit pixel edges facing background or the frame
    border; ``centroid`` is the mean (x, y) of member pixel coordinates.
    """
    label: int
    area: int
    perimeter: int
    centroid: Tuple[float, float]
    bbox: BoundingBox

    def sort_key(self) -> Tuple[int, int, int]:
        return -self.area, self.bbox.y_min, self.bbox.x_min


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Row-major component ids; 0 is background, components are 1..count."""
    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int32, copy=True)
        if labels.ndim != 2:
            raise ValueError(f"label map must be 2-D, got shape {labels.shape}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def count(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def mask_of(self, label: int) -> BinaryMask:
        return BinaryMask(self.labels == label)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


def _exposed_edges(labels: np.ndarray) -> np.ndarray:
    """Per-pixel count of 4-neighbors (off-frame included) carrying a different label."""
    padded = np.pad(labels, 1, constant_values=0)
    center = padded[1:-1, 1:-1]
    exposed = np.zeros(labels.shape, dtype=np.int64)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        neighbor = padded[1 + dy:1 + dy + labels.shape[0], 1 + dx:1 + dx + labels.shape[1]]
        exposed += neighbor != center
    return exposed


def label_components(
    m: BinaryMask,
    connectivity: Connectivity = Connectivity.EIGHT
) -> Tuple[LabelMap, List[Blob]]:
    """
    Partition the foreground into connected components.

    Labels are renumbered so that label 1 is the first blob in the returned
    order: descending area, then smaller min-y, then smaller min-x.

    Args:
        m: Binarized frame
        connectivity: 4- or 8-adjacency

    Returns:
        (label map, blobs in sorted order)
    """
    raw, count = ndimage.label(m.bits, structure=Connectivity(connectivity).structure())
    if count == 0:
        return LabelMap(np.zeros(m.bits.shape, dtype=np.int32)), []

    ys, xs = np.indices(raw.shape)
    flat = raw.ravel()
    areas = np.bincount(flat, minlength=count + 1)
    sum_x = np.bincount(flat, weights=xs.ravel(), minlength=count + 1)
    sum_y = np.bincount(flat, weights=ys.ravel(), minlength=count + 1)
    exposed = _exposed_edges(raw)
    perimeters = np.bincount(flat, weights=exposed.ravel(), minlength=count + 1)
    slices = ndimage.find_objects(raw)

    provisional = []
    for label in range(1, count + 1):
        rows, cols = slices[label - 1]
        provisional.append(Blob(
            label=label,
            area=int(areas[label]),
            perimeter=int(perimeters[label]),
            centroid=(float(sum_x[label] / areas[label]), float(sum_y[label] / areas[label])),
            bbox=BoundingBox(cols.start, rows.start, cols.stop - 1, rows.stop - 1),
        ))
    provisional.sort(key=Blob.sort_key)

    remap = np.zeros(count + 1, dtype=np.int32)
    blobs = []
    for new_label, blob in enumerate(provisional, start=1):
        remap[blob.label] = new_label
        blobs.append(Blob(new_label, blob.area, blob.perimeter, blob.centroid, blob.bbox))

    logger.debug("labeled %d components (%d-connectivity)", count, int(connectivity))
    return LabelMap(remap[raw]), blobs


def blob_metrics(label_map: LabelMap, label: int) -> Blob:
    """
    Measure a single labeled component.

    Raises:
        UnknownLabel: label does not occur in the map
    """
    member = label_map.labels == label
    if label <= 0 or not member.any():
        raise UnknownLabel(f"label {label} does not occur in the map")

    ys, xs = np.nonzero(member)
    exposed = _exposed_edges(member.astype(np.int32))
    return Blob(
        label=int(label),
        area=int(xs.size),
        perimeter=int(exposed[member].sum()),
        centroid=(float(xs.mean()), float(ys.mean())),
        bbox=BoundingBox(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
    )


def largest_blob(blobs: Sequence[Blob]) -> Optional[Blob]:
    """Largest area, ties to smaller min-y then smaller min-x; None for no blobs."""
    if not blobs:
        return None
    return min(blobs, key=Blob.sort_key)
