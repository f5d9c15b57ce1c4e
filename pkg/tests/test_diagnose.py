"""
Unit tests for utils/diagnose.py module

Tests the full inspection pipeline, verdict rules, annotation, JSON reports and batch rows
"""

import json
import re
from decimal import Decimal
import pytest
import numpy as np
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from utils.blob import Blob, BoundingBox
from utils.config import PipelineConfig
from utils.diagnose import (
    ANNOTATION_COLOR,
    BATCH_COLUMNS,
    QualityReport,
    Verdict,
    annotate,
    batch_frame,
    batch_to_csv,
    error_row,
    inspect,
    report_from_json,
    report_row,
    report_to_json,
    summarize_batch,
)
from utils.draw import fill_disc
from utils.errors import DimensionMismatch, MalformedReport
from utils.raster import RasterImage, decode_image
from utils.synth import DISC_RADIUS, disc_image


def oracle_disc_area():
    canvas = np.zeros((480, 640, 3), dtype=np.uint8)
    return fill_disc(canvas, 320.0, 240.0, DISC_RADIUS, (255, 0, 0))


def pixel_report(x, y, width=20, height=20):
    blob = Blob(1, 1, 4, (float(x), float(y)), BoundingBox(x, y, x, y))
    return QualityReport(True, Verdict.REJECT, width, height, 0.0025, 1.0, 0.0, blob)


class TestInspect:
    """Tests for the end-to-end pipeline"""

    def test_black_image_no_flower(self, black_img):
        """Test an all-black frame reports no flower"""
        report = inspect(black_img)
        assert not report.detected
        assert report.verdict is Verdict.NO_FLOWER
        assert report.blob is None

    def test_disc_detected(self, disc_img):
        """Test the red disc is found at the frame center with the right area"""
        report = inspect(disc_img)
        assert report.detected
        assert report.verdict is Verdict.EXPORT_GRADE
        cx, cy = report.blob.centroid
        assert abs(cx - 320) <= 1.0 and abs(cy - 240) <= 1.0
        assert report.blob.area == pytest.approx(oracle_disc_area(), rel=0.02)

    def test_disc_metrics(self, disc_img):
        """Test uniformity and defect ratio of a clean disc"""
        report = inspect(disc_img)
        assert report.uniformity == 1.0
        assert 0.0 < report.defect_ratio <= 0.1
        assert report.area_fraction == round(report.blob.area / (640 * 480), 6)

    def test_source_dimensions(self, disc_img):
        """Test the report remembers the source size"""
        report = inspect(disc_img)
        assert (report.source_width, report.source_height) == (640, 480)

    def test_scale_consistency(self, disc_img):
        """Test factor 1 and factor 2 agree on the centroid within 2 px"""
        full = inspect(disc_img, PipelineConfig(resize_factor=1))
        half = inspect(disc_img, PipelineConfig(resize_factor=2))
        assert abs(full.blob.centroid[0] - half.blob.centroid[0]) <= 2
        assert abs(full.blob.centroid[1] - half.blob.centroid[1]) <= 2
        assert half.blob.area == pytest.approx(full.blob.area, rel=0.05)

    def test_roi_offsets_coordinates(self, disc_img):
        """Test blob coordinates stay in source pixels when a region is selected"""
        report = inspect(disc_img, PipelineConfig(roi=(200, 150, 250, 200)))
        assert report.blob.centroid[0] == pytest.approx(320, abs=1.0)
        assert report.blob.centroid[1] == pytest.approx(240, abs=1.0)

    def test_small_blob_below_min_area(self, disc_img):
        """Test a blob under the area floor gives no flower but keeps its fraction"""
        report = inspect(disc_img, PipelineConfig(min_area_fraction=0.5))
        assert report.verdict is Verdict.NO_FLOWER
        assert 0 < report.area_fraction < 0.5

    def test_oversized_blob_rejected(self):
        """Test a flower filling the frame is rejected"""
        report = inspect(RasterImage.filled(40, 30, (220, 30, 30)))
        assert report.area_fraction == 1.0
        assert report.verdict is Verdict.REJECT

    def test_dull_disc_rejected(self):
        """Test a disc that is red only under the base range fails uniformity"""
        report = inspect(disc_image(color=(160, 95, 30)))
        assert report.detected
        assert report.uniformity < 0.85
        assert report.verdict is Verdict.REJECT

    def test_defect_limit(self, disc_img):
        """Test tightening the defect limit below the measured ratio rejects"""
        measured = inspect(disc_img).defect_ratio
        report = inspect(disc_img, PipelineConfig(max_defect_ratio=measured / 2))
        assert report.verdict is Verdict.REJECT

    def test_lower_uniformity_never_rejects(self, carnation_img):
        """Test lowering min_uniformity cannot turn export grade into reject"""
        previous = None
        for threshold in (1.0, 0.95, 0.9, 0.85, 0.5, 0.0):
            verdict = inspect(carnation_img, PipelineConfig(min_uniformity=threshold)).verdict
            if previous is Verdict.EXPORT_GRADE:
                assert verdict is Verdict.EXPORT_GRADE
            previous = verdict

    def test_deterministic_json(self, carnation_img):
        """Test the same image and config give byte-identical reports"""
        assert report_to_json(inspect(carnation_img)) == report_to_json(inspect(carnation_img))

    def test_carnation_flows(self, carnation_img):
        """Test the 399x515 still life is detected"""
        report = inspect(carnation_img)
        assert report.detected
        assert (report.source_width, report.source_height) == (399, 515)

    def test_carnation_golden(self, carnation_img, golden_file):
        """Test the carnation report matches the committed golden JSON"""
        assert decode_image(golden_file("carnation.png")) == carnation_img
        assert report_to_json(inspect(carnation_img)) == golden_file("carnation_report.json").rstrip(b"\n")

    def test_config_echo(self, disc_img):
        """Test the report echoes the pipeline settings"""
        report = inspect(disc_img, PipelineConfig(mask=PipelineConfig().mask))
        assert report.config_echo["filter.mask"] == "circular:5"
        assert "pilot.k_v" not in report.config_echo


class TestQualityReport:
    """Tests for report consistency checks"""

    def test_inconsistent_rejected(self):
        """Test detected without a blob is refused"""
        with pytest.raises(ValueError):
            QualityReport(True, Verdict.EXPORT_GRADE, 10, 10)

    def test_fraction_bounds(self):
        """Test fractions outside [0, 1] are refused"""
        with pytest.raises(ValueError):
            QualityReport(False, Verdict.NO_FLOWER, 10, 10, area_fraction=1.5)


class TestAnnotate:
    """Tests for report annotation"""

    def test_no_flower_returns_copy(self, black_img):
        """Test a no-flower report leaves the image unchanged"""
        report = inspect(black_img)
        assert annotate(black_img, report) == black_img

    def test_cross_at_single_pixel(self):
        """Test the centroid cross spans four pixels each way"""
        img = RasterImage.filled(20, 20, (0, 0, 0))
        out = annotate(img, pixel_report(10, 10))
        for d in range(-4, 5):
            assert out.pixel(10 + d, 10) == ANNOTATION_COLOR
            assert out.pixel(10, 10 + d) == ANNOTATION_COLOR
        assert out.pixel(15, 10) == (0, 0, 0)
        assert out.pixel(10, 5) == (0, 0, 0)
        assert out.pixel(9, 9) == (0, 0, 0)

    def test_cross_clipped(self):
        """Test a cross near the corner is clipped at the frame"""
        img = RasterImage.filled(20, 20, (0, 0, 0))
        out = annotate(img, pixel_report(1, 1))
        assert out.pixel(0, 1) == ANNOTATION_COLOR
        assert out.pixel(5, 1) == ANNOTATION_COLOR
        assert out.pixel(6, 1) == (0, 0, 0)

    def test_bbox_outline(self, disc_img):
        """Test the bounding box corners are painted"""
        report = inspect(disc_img)
        out = annotate(disc_img, report)
        box = report.blob.bbox
        assert out.pixel(box.x_min, box.y_min) == ANNOTATION_COLOR
        assert out.pixel(box.x_max, box.y_max) == ANNOTATION_COLOR

    def test_dimension_mismatch(self, disc_img, black_img):
        """Test annotating a different-sized image raises DimensionMismatch"""
        with pytest.raises(DimensionMismatch):
            annotate(black_img, inspect(disc_img))

    def test_disc_golden(self, disc_img, golden_file):
        """Test the annotated disc matches the committed golden PNG"""
        assert decode_image(golden_file("disc.png")) == disc_img
        assert annotate(disc_img, inspect(disc_img)) == decode_image(golden_file("disc_annotated.png"))


class TestReportJson:
    """Tests for the JSON report form"""

    def test_round_trip(self, disc_img, black_img):
        """Test parse(serialize(report)) gives an equal report"""
        for img in (disc_img, black_img):
            report = inspect(img)
            assert report_from_json(report_to_json(report)) == report

    def test_fraction_tokens(self, disc_img):
        """Test fractions are written in shortest form with at most six decimals"""
        data = report_to_json(QualityReport(False, Verdict.NO_FLOWER, 10, 10, area_fraction=0.85))
        assert b'"area_fraction":0.85,' in data

        report = inspect(disc_img)
        text = report_to_json(report).decode("ascii")
        for name in ("area_fraction", "uniformity", "defect_ratio"):
            token = re.search(rf'"{name}":([0-9.e-]+)', text).group(1)
            assert Decimal(token).as_tuple().exponent >= -6
            assert float(token) == getattr(report, name)

    def test_no_flower_schema(self, black_img):
        """Test a no-flower report has the verdict string and no blob key"""
        data = report_to_json(inspect(black_img))
        assert b'"verdict":"no_flower"' in data
        assert "blob" not in json.loads(data)

    def test_sorted_compact(self, disc_img):
        """Test keys are sorted and separators compact"""
        data = report_to_json(inspect(disc_img))
        doc = json.loads(data)
        assert list(doc) == sorted(doc)
        assert b", " not in data

    def test_missing_verdict(self):
        """Test hand-written JSON without a verdict raises MalformedReport"""
        doc = {"detected": False, "source": {"width": 1, "height": 1},
               "area_fraction": 0, "uniformity": 0, "defect_ratio": 0}
        with pytest.raises(MalformedReport):
            report_from_json(json.dumps(doc).encode())

    @pytest.mark.parametrize("data", [b"", b"not json", b"[]", b'{"verdict": "perfect"}'])
    def test_garbage(self, data):
        """Test malformed input raises MalformedReport"""
        with pytest.raises(MalformedReport):
            report_from_json(data)


class TestBatchRows:
    """Tests for batch rows, CSV and summary"""

    def test_report_row(self, disc_img):
        """Test a detected report fills every column"""
        row = report_row("disc.png", inspect(disc_img))
        assert list(row) == BATCH_COLUMNS
        assert row["verdict"] == "export_grade"
        assert row["area"] > 0

    def test_no_flower_row_blank(self, black_img):
        """Test blob columns are empty for no flower"""
        row = report_row("black.png", inspect(black_img))
        assert row["verdict"] == "no_flower"
        assert row["area"] is None

    def test_csv_layout(self, disc_img, black_img):
        """Test CSV header, integer columns and blank cells"""
        rows = [report_row("a.png", inspect(disc_img)), report_row("b.png", inspect(black_img))]
        lines = batch_to_csv(rows).splitlines()
        assert lines[0] == ",".join(BATCH_COLUMNS)
        assert lines[1].startswith("a.png,export_grade,")
        assert "." not in lines[1].split(",")[2]
        assert lines[2] == "b.png,no_flower,,,,,,"

    def test_empty_csv_header_only(self):
        """Test no rows gives only the header"""
        assert batch_to_csv([]) == ",".join(BATCH_COLUMNS) + "\n"
        assert len(batch_frame([])) == 0

    def test_summary(self, disc_img, black_img):
        """Test per-verdict counts and shares"""
        rows = [report_row("a.png", inspect(disc_img)), report_row("b.png", inspect(black_img)),
                error_row("c.png")]
        summary = summarize_batch(rows)
        assert summary["total_files"] == 3
        assert (summary["export_grade"], summary["no_flower"], summary["errors"]) == (1, 1, 1)
        assert summary["export_share"] == pytest.approx(1 / 3)
        assert summary["mean_uniformity"] == 1.0

    def test_summary_empty(self):
        """Test an empty batch summarizes to zero files"""
        assert summarize_batch([]) == {"total_files": 0}
