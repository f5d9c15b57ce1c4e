"""
Unit tests for utils/segment.py module

Tests the RGB range predicate, binarization and representative-pixel calibration
"""

import pytest
import numpy as np
import sys
import os
from fractions import Fraction

from hypothesis import given, settings, strategies as st

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from utils.raster import PixelCoord, RasterImage
from utils.segment import (
    DEFAULT_RED,
    BinaryMask,
    ColorRange,
    binarize,
    calibrate_range,
    classify_pixel,
)

channels = st.integers(0, 255)
pixels = st.tuples(channels, channels, channels)


class TestColorRange:
    """Tests for the selection range type"""

    def test_defaults(self):
        """Test the default red range bounds"""
        assert (DEFAULT_RED.r_min, DEFAULT_RED.r_max) == (100, 255)
        assert (DEFAULT_RED.g_min, DEFAULT_RED.g_max) == (0, 100)
        assert DEFAULT_RED.dominance == Fraction(3, 2)

    def test_inverted_bounds_rejected(self):
        """Test min above max raises ValueError"""
        with pytest.raises(ValueError):
            ColorRange(r_min=200, r_max=100)

    def test_dominance_below_one_rejected(self):
        """Test a dominance under 1 raises ValueError"""
        with pytest.raises(ValueError):
            ColorRange(dominance=Fraction(1, 2))

    def test_strict_raises_dominance(self):
        """Test the strict range adds a quarter to the ratio"""
        assert DEFAULT_RED.strict().dominance == Fraction(7, 4)
        assert ColorRange(dominance=None).strict().dominance == Fraction(5, 4)


class TestClassifyPixel:
    """Tests for the per-pixel predicate"""

    def test_red_inside(self):
        """Test a clearly red pixel passes"""
        assert classify_pixel((200, 30, 30))

    def test_green_too_high(self):
        """Test g above g_max fails"""
        assert not classify_pixel((200, 150, 30))

    def test_dominance_boundary_inclusive(self):
        """Test r == 1.5*g exactly still passes"""
        assert classify_pixel((120, 80, 80))
        assert not classify_pixel((119, 80, 80))

    def test_no_dominance(self):
        """Test an unset dominance only checks bounds"""
        assert classify_pixel((100, 100, 100), ColorRange(dominance=None))


class TestBinarize:
    """Tests for mask construction"""

    def test_white_image_is_empty(self):
        """Test white fails the red range everywhere"""
        mask = binarize(RasterImage.filled(6, 4, (255, 255, 255)))
        assert mask.count() == 0
        assert (mask.width, mask.height) == (6, 4)

    def test_pure_red_is_full(self):
        """Test pure red passes everywhere"""
        assert binarize(RasterImage.filled(6, 4, (255, 0, 0))).count() == 24

    def test_matches_pixel_loop_on_carnation(self, carnation_img):
        """Test the vectorized mask equals a scalar loop over the 399x515 still life"""
        mask = binarize(carnation_img)
        expected = sum(
            classify_pixel(carnation_img.pixel(x, y))
            for y in range(carnation_img.height)
            for x in range(carnation_img.width)
        )
        assert mask.count() == expected

    def test_matches_pixel_loop_bitwise(self, random_img):
        """Test every bit equals classify_pixel on the same pixel"""
        loose = ColorRange(r_min=0, g_max=255, b_max=255, dominance=Fraction(1))
        mask = binarize(random_img, loose)
        for y in range(random_img.height):
            for x in range(random_img.width):
                assert mask.bits[y, x] == classify_pixel(random_img.pixel(x, y), loose)

    def test_repeatable(self, carnation_img):
        """Test binarizing twice gives identical masks"""
        assert binarize(carnation_img) == binarize(carnation_img)

    @given(pixels, st.integers(0, 40), st.integers(0, 40))
    @settings(max_examples=200, deadline=None)
    def test_widening_never_clears(self, pixel, widen_lo, widen_hi):
        """Test lowering mins, raising maxes and dropping dominance keep passing pixels"""
        narrow = ColorRange(120, 220, 20, 80, 20, 80, Fraction(2))
        wide = ColorRange(
            max(narrow.r_min - widen_lo, 0), min(narrow.r_max + widen_hi, 255),
            max(narrow.g_min - widen_lo, 0), min(narrow.g_max + widen_hi, 255),
            max(narrow.b_min - widen_lo, 0), min(narrow.b_max + widen_hi, 255),
            Fraction(3, 2),
        )
        if classify_pixel(pixel, narrow):
            assert classify_pixel(pixel, wide)


class TestBinaryMask:
    """Tests for the mask type"""

    def test_complement(self):
        """Test complement flips every bit"""
        mask = BinaryMask(np.array([[True, False]]))
        assert mask.complement() == BinaryMask(np.array([[False, True]]))

    def test_issubset(self):
        """Test subset checks bitwise inclusion"""
        small = BinaryMask(np.array([[True, False, False]]))
        big = BinaryMask(np.array([[True, True, False]]))
        assert small.issubset(big)
        assert not big.issubset(small)

    def test_read_only(self):
        """Test mask bits cannot be modified"""
        mask = BinaryMask.empty(2, 2)
        with pytest.raises(ValueError):
            mask.bits[0, 0] = True


class TestCalibrateRange:
    """Tests for deriving a range from sample pixels"""

    def test_bounds_with_margin(self):
        """Test bounds are sample min/max widened by the margin"""
        arr = np.zeros((1, 2, 3), dtype=np.uint8)
        arr[0, 0] = (200, 30, 40)
        arr[0, 1] = (180, 50, 20)
        cr = calibrate_range(RasterImage(arr), [PixelCoord(0, 0), PixelCoord(1, 0)], margin=10)
        assert (cr.r_min, cr.r_max) == (170, 210)
        assert (cr.g_min, cr.g_max) == (20, 60)
        assert (cr.b_min, cr.b_max) == (10, 50)

    def test_dominance_quarters(self):
        """Test dominance is the largest k/4 all samples satisfy"""
        img = RasterImage.filled(1, 1, (150, 80, 10))
        cr = calibrate_range(img, [PixelCoord(0, 0)], margin=0)
        assert cr.dominance == Fraction(7, 4)

    def test_dominance_capped(self):
        """Test pure red stops at a ratio of two"""
        img = RasterImage.filled(1, 1, (255, 0, 0))
        assert calibrate_range(img, [PixelCoord(0, 0)]).dominance == Fraction(2)

    def test_not_red_dominant(self):
        """Test a grey sample leaves dominance unset"""
        img = RasterImage.filled(1, 1, (100, 120, 90))
        assert calibrate_range(img, [PixelCoord(0, 0)]).dominance is None

    def test_margin_clamped(self):
        """Test bounds never leave [0, 255]"""
        img = RasterImage.filled(1, 1, (250, 5, 5))
        cr = calibrate_range(img, [PixelCoord(0, 0)], margin=20)
        assert cr.r_max == 255
        assert cr.g_min == 0

    def test_samples_pass_calibrated_range(self, carnation_img):
        """Test every sampled pixel classifies as foreground"""
        samples = [PixelCoord(199, 190), PixelCoord(199, 130), PixelCoord(240, 190)]
        cr = calibrate_range(carnation_img, samples)
        for x, y in samples:
            assert classify_pixel(carnation_img.pixel(x, y), cr)

    def test_empty_samples(self):
        """Test an empty sample list raises ValueError"""
        with pytest.raises(ValueError):
            calibrate_range(RasterImage.filled(1, 1, (0, 0, 0)), [])

    def test_sample_outside(self):
        """Test a coordinate outside the image raises ValueError"""
        with pytest.raises(ValueError):
            calibrate_range(RasterImage.filled(2, 2, (0, 0, 0)), [PixelCoord(5, 0)])
