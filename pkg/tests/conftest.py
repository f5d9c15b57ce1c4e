"""
Pytest configuration and shared fixtures for flowerbot tests

This file contains:
- Pytest configuration hooks
- Shared image, mask and world fixtures
- Brute-force oracles for morphology and blob analysis
- A background inspection server
"""

import pytest
import numpy as np
import networkx as nx
import sys
import os
from pathlib import Path

# Add project root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from utils.config import PipelineConfig
from utils.raster import ImageFormat, RasterImage, encode_image
from utils.synth import black_image, carnation_image, disc_image


# ==================== FIXTURES: Images ====================

@pytest.fixture(scope="session")
def disc_img():
    """
    Red disc of radius 50 centered in a 640x480 black frame

    Returns:
        RasterImage
    """
    return disc_image()


@pytest.fixture(scope="session")
def black_img():
    """Provides an all-black 64x64 frame"""
    return black_image()


@pytest.fixture(scope="session")
def carnation_img():
    """Provides the 399x515 carnation still life"""
    return carnation_image()


@pytest.fixture
def two_pixel_ppm():
    """Provides the smallest interesting P6 stream: red then black"""
    return b"P6 2 1 255\n" + bytes([255, 0, 0, 0, 0, 0])


@pytest.fixture
def random_img():
    """
    Provides a seeded random 8x8 image

    Returns:
        RasterImage with uniformly random channels
    """
    rng = np.random.default_rng(1234)
    return RasterImage(rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8))


# ==================== FIXTURES: Files ====================

@pytest.fixture
def disc_png(tmp_path, disc_img):
    """Writes the disc fixture as PNG and returns its path"""
    path = tmp_path / "disc.png"
    path.write_bytes(encode_image(disc_img, ImageFormat.PNG))
    return path


@pytest.fixture
def black_png(tmp_path, black_img):
    """Writes the black fixture as PNG and returns its path"""
    path = tmp_path / "black.png"
    path.write_bytes(encode_image(black_img, ImageFormat.PNG))
    return path


@pytest.fixture
def image_dir(tmp_path, disc_img, black_img):
    """
    Directory holding a disc and a black image plus a non-image file

    Returns:
        Path to the directory
    """
    directory = tmp_path / "images"
    directory.mkdir()
    (directory / "b_black.ppm").write_bytes(encode_image(black_img, ImageFormat.PPM))
    (directory / "a_disc.png").write_bytes(encode_image(disc_img, ImageFormat.PNG))
    (directory / "notes.txt").write_text("not an image")
    return directory


@pytest.fixture
def world_file(tmp_path):
    """Writes a single-flower world 2 m dead ahead"""
    path = tmp_path / "ahead.world"
    path.write_text("# one flower straight ahead\nflower = 2.0, 0.0, 0.05, 220, 30, 40\n")
    return path


@pytest.fixture
def config_file(tmp_path):
    """
    Writes a config file switching to a rectangular mask and 4-connectivity

    Returns:
        Path to the file
    """
    path = tmp_path / "flowerbot.conf"
    path.write_text(
        "# inspection settings\n"
        "filter.mask = rect:5x5\n"
        "blob.connectivity = 4\n"
        "verdict.min_uniformity = 0.9\n"
    )
    return path


@pytest.fixture
def default_cfg():
    """Provides the compiled-in pipeline configuration"""
    return PipelineConfig()


# ==================== FIXTURES: Oracles ====================

def _brute_erode(bits, offsets):
    h, w = bits.shape
    out = np.zeros_like(bits)
    for y in range(h):
        for x in range(w):
            out[y, x] = all(
                0 <= x + dx < w and 0 <= y + dy < h and bits[y + dy, x + dx]
                for dx, dy in offsets
            )
    return out


def _brute_dilate(bits, offsets):
    h, w = bits.shape
    out = np.zeros_like(bits)
    for y in range(h):
        for x in range(w):
            out[y, x] = any(
                0 <= x - dx < w and 0 <= y - dy < h and bits[y - dy, x - dx]
                for dx, dy in offsets
            )
    return out


@pytest.fixture(scope="session")
def morph_oracle():
    """
    Definitional erosion/dilation over explicit (dx, dy) offsets

    Returns:
        dict with ``erode`` and ``dilate`` callables on bool arrays
    """
    return {"erode": _brute_erode, "dilate": _brute_dilate}


def _components(bits, connectivity):
    h, w = bits.shape
    graph = nx.Graph()
    steps = [(1, 0), (0, 1)]
    if connectivity == 8:
        steps += [(1, 1), (1, -1)]
    for y, x in zip(*np.nonzero(bits)):
        graph.add_node((int(x), int(y)))
        for dx, dy in steps:
            nx_, ny_ = x + dx, y + dy
            if 0 <= nx_ < w and 0 <= ny_ < h and bits[ny_, nx_]:
                graph.add_edge((int(x), int(y)), (int(nx_), int(ny_)))

    result = []
    for comp in nx.connected_components(graph):
        perimeter = 0
        for x, y in comp:
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                if (x + dx, y + dy) not in comp:
                    perimeter += 1
        xs = [p[0] for p in comp]
        ys = [p[1] for p in comp]
        result.append({
            "pixels": frozenset(comp),
            "area": len(comp),
            "perimeter": perimeter,
            "centroid": (sum(xs) / len(xs), sum(ys) / len(ys)),
        })
    return result


@pytest.fixture(scope="session")
def blob_oracle():
    """
    Flood-fill component oracle built on networkx

    Returns:
        callable(bits, connectivity) -> list of dicts (pixels, area, perimeter, centroid)
    """
    return _components


def random_mask(rng, max_side=32, density=None):
    """Random bool mask with sides in [1, max_side]."""
    h, w = rng.integers(1, max_side + 1, size=2)
    p = rng.uniform(0.2, 0.8) if density is None else density
    return rng.random((h, w)) < p


def random_se_grid(rng, max_side=5):
    """Random odd-sided SE grid (at most max_side) with an active anchor."""
    sides = [1, 3, 5][: (max_side + 1) // 2]
    h, w = rng.choice(sides), rng.choice(sides)
    grid = rng.random((h, w)) < 0.6
    grid[h // 2, w // 2] = True
    return grid


@pytest.fixture(scope="session")
def mask_factory():
    """Provides the seeded random mask and SE generators"""
    return {"mask": random_mask, "se": random_se_grid}


# ==================== FIXTURES: Golden files ====================

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def golden_file():
    """
    Reader for committed files under fixtures/

    A missing file fails the calling test; regenerate with
    ``python scripts/make_fixtures.py`` and commit the output.

    Returns:
        Callable taking a path relative to fixtures/ and returning its bytes
    """
    def read(name):
        path = FIXTURES_DIR / name
        if not path.is_file():
            pytest.fail(f"golden file fixtures/{name} is missing; run scripts/make_fixtures.py and commit it")
        return path.read_bytes()

    return read


# ==================== FIXTURES: Server ====================

@pytest.fixture
def inspection_server():
    """
    Inspection server on a free local port with default settings

    Yields:
        InspectionServer (``.endpoint`` gives host and port)
    """
    from utils.wire import start_server

    server = start_server(("127.0.0.1", 0))
    yield server
    server.shutdown()
    server.server_close()


# ==================== PYTEST HOOKS ====================

MODULE_MARKERS = ("raster", "filter", "segment", "morph", "blob", "config",
                  "diagnose", "pilot", "wire", "cli")


def pytest_collection_modifyitems(config, items):
    """
    Pytest hook to modify collected test items

    Automatically marks tests based on module and name patterns
    """
    for item in items:
        module = os.path.basename(str(item.fspath))[len("test_"):-len(".py")]
        if module in MODULE_MARKERS:
            item.add_marker(getattr(pytest.mark, module))

        # Mark slow tests
        if "acceptance" in item.nodeid or "closed_loop" in item.nodeid:
            item.add_marker(pytest.mark.slow)

        # Mark integration tests
        if module in ("wire", "cli") or "integration" in item.nodeid:
            item.add_marker(pytest.mark.integration)
