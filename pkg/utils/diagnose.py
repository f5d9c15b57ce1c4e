"""
Diagnosis module for the flowerbot inspection toolkit
Runs the full inspection pipeline and produces the quality report ("log")
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, Mapping, Optional

import numpy as np
import pandas as pd

from .blob import Blob, BoundingBox, label_components, largest_blob
from .config import PipelineConfig, pipeline_to_dict
from .draw import cross, outline_rect
from .errors import DimensionMismatch, MalformedReport
from .logger import get_logger
from .morph import DEFAULT_SE, apply_sequence, dilate
from .raster import RasterImage, crop, resize_box, stretch_contrast
from .filter import mean_filter
from .segment import BinaryMask, binarize, color_test

logger = get_logger(__name__)

FRACTION_DIGITS = 6
ANNOTATION_COLOR = (0, 255, 0)
CROSS_ARM = 4

BATCH_COLUMNS = [
    "filename", "verdict", "area", "perimeter",
    "centroid_x", "centroid_y", "uniformity", "defect_ratio",
]


class Verdict(str, Enum):
    EXPORT_GRADE = "export_grade"
    REJECT = "reject"
    NO_FLOWER = "no_flower"


@dataclass(frozen=True)
class QualityReport:
    """
    One inspection log entry.

    Blob coordinates are in source-image pixels. Fractions are rounded to
    six decimals so the JSON form round-trips exactly.
    """
    detected: bool
    verdict: Verdict
    source_width: int
    source_height: int
    area_fraction: float = 0.0
    uniformity: float = 0.0
    defect_ratio: float = 0.0
    blob: Optional[Blob] = None
    config_echo: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        no_flower = self.verdict is Verdict.NO_FLOWER
        if self.detected == no_flower or (self.blob is None) != no_flower:
            raise ValueError("detected, verdict and blob disagree")
        for name in ("area_fraction", "uniformity", "defect_ratio"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {getattr(self, name)}")


def _quantize(value: float) -> float:
    return round(float(value), FRACTION_DIGITS)


def _to_source(blob: Blob, factor: int, origin, work_width: int, work_height: int) -> Blob:
    """Map a blob measured on the resized frame back to source pixels."""
    ox, oy = origin
    half = (factor - 1) / 2.0
    box = blob.bbox
    return Blob(
        label=blob.label,
        area=blob.area * factor * factor,
        perimeter=blob.perimeter * factor,
        centroid=(blob.centroid[0] * factor + half + ox, blob.centroid[1] * factor + half + oy),
        bbox=BoundingBox(
            box.x_min * factor + ox,
            box.y_min * factor + oy,
            min(box.x_max * factor + factor - 1, work_width - 1) + ox,
            min(box.y_max * factor + factor - 1, work_height - 1) + oy,
        ),
    )


def inspect(img: RasterImage, cfg: Optional[PipelineConfig] = None) -> QualityReport:
    """
    Run crop -> resize -> mean filter -> (contrast) -> binarize -> morphology
    -> labeling -> largest blob -> metrics -> verdict.

    Args:
        img: Captured frame
        cfg: Pipeline settings (defaults when omitted)

    Returns:
        QualityReport for the largest red component
    """
    cfg = cfg or PipelineConfig()
    echo = pipeline_to_dict(cfg)

    work, origin = img, (0, 0)
    if cfg.roi is not None:
        work = crop(img, cfg.roi)
        origin = (max(cfg.roi[0], 0), max(cfg.roi[1], 0))

    small = resize_box(work, cfg.resize_factor)
    filtered = mean_filter(small, cfg.kernel)
    if cfg.enhance_contrast:
        filtered = stretch_contrast(filtered)

    mask = binarize(filtered, cfg.color_range)
    mask = apply_sequence(mask, cfg.structuring_element, cfg.morph_sequence)
    label_map, blobs = label_components(mask, cfg.connectivity)
    blob = largest_blob(blobs)

    def no_flower(area_fraction: float = 0.0) -> QualityReport:
        return QualityReport(False, Verdict.NO_FLOWER, img.width, img.height,
                             area_fraction=area_fraction, config_echo=echo)

    if blob is None:
        logger.info("no candidate region in %dx%d frame", img.width, img.height)
        return no_flower()

    area_fraction = _quantize(blob.area / float(small.width * small.height))
    if area_fraction < cfg.min_area_fraction:
        logger.info("largest region covers %.6f of the frame, below %.6f",
                    area_fraction, cfg.min_area_fraction)
        return no_flower(area_fraction)

    member = label_map.labels == blob.label
    passes_strict = color_test(filtered.pixels[member], cfg.color_range.strict())
    uniformity = _quantize(passes_strict.mean())

    box = blob.bbox
    window = (slice(box.y_min, box.y_max + 1), slice(box.x_min, box.x_max + 1))
    candidates = dilate(BinaryMask(member), DEFAULT_SE).bits[window]
    fails_base = ~color_test(filtered.pixels[window], cfg.color_range)
    defect_ratio = _quantize(np.count_nonzero(candidates & fails_base) / np.count_nonzero(candidates))

    if (area_fraction > cfg.max_area_fraction
            or uniformity < cfg.min_uniformity
            or defect_ratio > cfg.max_defect_ratio):
        verdict = Verdict.REJECT
    else:
        verdict = Verdict.EXPORT_GRADE

    scaled = _to_source(blob, cfg.resize_factor, origin, work.width, work.height)
    logger.info("verdict %s: area_fraction=%.6f uniformity=%.6f defect_ratio=%.6f",
                verdict.value, area_fraction, uniformity, defect_ratio)
    return QualityReport(True, verdict, img.width, img.height, area_fraction,
                         uniformity, defect_ratio, scaled, echo)


def annotate(img: RasterImage, report: QualityReport) -> RasterImage:
    """
    Draw the blob's bounding box and a 9-pixel centroid cross.

    Raises:
        DimensionMismatch: report was produced from an image of other size
    """
    if (img.width, img.height) != (report.source_width, report.source_height):
        raise DimensionMismatch(
            f"report is for {report.source_width}x{report.source_height}, image is {img.width}x{img.height}")
    if report.blob is None:
        return RasterImage(img.pixels)

    canvas = img.to_array()
    box = report.blob.bbox
    outline_rect(canvas, box.x_min, box.y_min, box.x_max, box.y_max, ANNOTATION_COLOR)
    cx, cy = (int(np.floor(c + 0.5)) for c in report.blob.centroid)
    cross(canvas, cx, cy, CROSS_ARM, ANNOTATION_COLOR)
    return RasterImage(canvas)


# ==================== JSON ====================

def report_to_dict(report: QualityReport) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "detected": report.detected,
        "verdict": report.verdict.value,
        "source": {"width": report.source_width, "height": report.source_height},
        "area_fraction": report.area_fraction,
        "uniformity": report.uniformity,
        "defect_ratio": report.defect_ratio,
        "config": dict(report.config_echo),
    }
    if report.blob is not None:
        blob = report.blob
        data["blob"] = {
            "label": blob.label,
            "area": blob.area,
            "perimeter": blob.perimeter,
            "centroid": {"x": blob.centroid[0], "y": blob.centroid[1]},
            "bbox": {"x_min": blob.bbox.x_min, "y_min": blob.bbox.y_min,
                     "x_max": blob.bbox.x_max, "y_max": blob.bbox.y_max},
        }
    return data


def report_to_json(report: QualityReport) -> bytes:
    """Compact JSON with sorted keys; byte-identical for equal reports."""
    return json.dumps(report_to_dict(report), sort_keys=True, separators=(",", ":")).encode("utf-8")


def report_from_json(data: bytes) -> QualityReport:
    """
    Parse a report produced by ``report_to_json``.

    Raises:
        MalformedReport: invalid JSON, missing field or inconsistent values
    """
    try:
        doc = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
        blob = None
        if "blob" in doc:
            b = doc["blob"]
            blob = Blob(
                label=int(b["label"]),
                area=int(b["area"]),
                perimeter=int(b["perimeter"]),
                centroid=(float(b["centroid"]["x"]), float(b["centroid"]["y"])),
                bbox=BoundingBox(int(b["bbox"]["x_min"]), int(b["bbox"]["y_min"]),
                                 int(b["bbox"]["x_max"]), int(b["bbox"]["y_max"])),
            )
        config = doc.get("config", {})
        if not isinstance(config, dict):
            raise TypeError("config must be an object")
        return QualityReport(
            detected=bool(doc["detected"]),
            verdict=Verdict(doc["verdict"]),
            source_width=int(doc["source"]["width"]),
            source_height=int(doc["source"]["height"]),
            area_fraction=float(doc["area_fraction"]),
            uniformity=float(doc["uniformity"]),
            defect_ratio=float(doc["defect_ratio"]),
            blob=blob,
            config_echo={str(k): str(v) for k, v in config.items()},
        )
    except (ValueError, KeyError, TypeError, AttributeError, UnicodeDecodeError) as exc:
        raise MalformedReport(f"cannot parse quality report: {exc}") from exc


# ==================== BATCH ROWS ====================

def report_row(filename: str, report: QualityReport) -> Dict[str, Any]:
    """One batch CSV row; blob columns are empty when nothing was detected."""
    blob = report.blob
    return {
        "filename": filename,
        "verdict": report.verdict.value,
        "area": blob.area if blob else None,
        "perimeter": blob.perimeter if blob else None,
        "centroid_x": blob.centroid[0] if blob else None,
        "centroid_y": blob.centroid[1] if blob else None,
        "uniformity": report.uniformity if blob else None,
        "defect_ratio": report.defect_ratio if blob else None,
    }


def error_row(filename: str) -> Dict[str, Any]:
    row = {column: None for column in BATCH_COLUMNS}
    row.update(filename=filename, verdict="error")
    return row


def summarize_batch(rows: Iterable[Mapping[str, Any]]) -> Dict[str, Any]:
    """
    Summary statistics for a batch of inspected files.

    Args:
        rows: Batch rows as produced by ``report_row`` / ``error_row``

    Returns:
        Dictionary with per-verdict counts, export share and mean metrics
    """
    df = pd.DataFrame(list(rows), columns=BATCH_COLUMNS)
    if df.empty:
        return {"total_files": 0}

    counts = df["verdict"].value_counts()
    detected = df[df["verdict"].isin([Verdict.EXPORT_GRADE.value, Verdict.REJECT.value])]
    return {
        "total_files": len(df),
        "export_grade": int(counts.get(Verdict.EXPORT_GRADE.value, 0)),
        "reject": int(counts.get(Verdict.REJECT.value, 0)),
        "no_flower": int(counts.get(Verdict.NO_FLOWER.value, 0)),
        "errors": int(counts.get("error", 0)),
        "export_share": float(counts.get(Verdict.EXPORT_GRADE.value, 0)) / len(df),
        "mean_uniformity": float(detected["uniformity"].astype(float).mean()) if len(detected) else 0.0,
        "mean_defect_ratio": float(detected["defect_ratio"].astype(float).mean()) if len(detected) else 0.0,
    }


def batch_frame(rows: Iterable[Mapping[str, Any]]) -> pd.DataFrame:
    """Batch rows as a table; area and perimeter stay integers with blanks for missing values."""
    df = pd.DataFrame(list(rows), columns=BATCH_COLUMNS)
    for column in ("area", "perimeter"):
        df[column] = df[column].astype("Int64")
    for column in ("centroid_x", "centroid_y", "uniformity", "defect_ratio"):
        df[column] = df[column].astype(float)
    return df


def batch_to_csv(rows: Iterable[Mapping[str, Any]], path=None) -> Optional[str]:
    """Write (or return) the batch CSV; floats carry six decimals."""
    return batch_frame(rows).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
