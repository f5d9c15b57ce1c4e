"""
Regenerate the committed fixture files under fixtures/

    python scripts/make_fixtures.py [--out fixtures]

Writes the disc and carnation images, the carnation golden report, the
annotated disc and the CLI stdout transcripts. Tests fail while any of
these files is missing, so commit the output after a deliberate change.
"""

import argparse
import io
import os
import sys
import tempfile
from contextlib import contextmanager, redirect_stdout
from pathlib import Path

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import app
from utils.config import CONFIG_ENV_VAR
from utils.diagnose import annotate, inspect, report_to_json
from utils.logger import get_logger, setup_logger
from utils.raster import ImageFormat, encode_image
from utils.synth import black_image, carnation_image, disc_image

logger = get_logger(__name__)

AHEAD_WORLD = "# one flower straight ahead\nflower = 2.0, 0.0, 0.05, 220, 30, 40\n"


@contextmanager
def working_directory(path: Path):
    previous = Path.cwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(previous)


def transcript(argv) -> bytes:
    """Run the CLI and return what it printed on stdout."""
    buffer = io.StringIO()
    with redirect_stdout(buffer):
        code = app.main(argv)
    logger.info("flowerbot %s exited %d", " ".join(argv), code)
    return buffer.getvalue().encode("utf-8")


def write_images(out: Path) -> None:
    disc = disc_image()
    carnation = carnation_image()
    (out / "disc.png").write_bytes(encode_image(disc, ImageFormat.PNG))
    (out / "carnation.png").write_bytes(encode_image(carnation, ImageFormat.PNG))
    (out / "carnation_report.json").write_bytes(report_to_json(inspect(carnation)) + b"\n")
    (out / "disc_annotated.png").write_bytes(encode_image(annotate(disc, inspect(disc)), ImageFormat.PNG))
    (out / "ahead.world").write_text(AHEAD_WORLD)


def write_transcripts(out: Path) -> None:
    target = out / "transcripts"
    target.mkdir(exist_ok=True)

    with working_directory(out):
        (target / "inspect_disc.txt").write_bytes(transcript(["inspect", "disc.png"]))
        (target / "simulate_ahead.txt").write_bytes(transcript(["simulate", "--world", "ahead.world"]))

    with tempfile.TemporaryDirectory() as tmp:
        images = Path(tmp)
        (images / "b_black.ppm").write_bytes(encode_image(black_image(), ImageFormat.PPM))
        (images / "a_disc.png").write_bytes(encode_image(disc_image(), ImageFormat.PNG))
        (images / "notes.txt").write_text("not an image")
        (target / "batch_mixed.csv").write_bytes(transcript(["batch", str(images)]))


def write_fixtures(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    # golden output is for the compiled defaults, whatever .env says
    os.environ[CONFIG_ENV_VAR] = ""
    write_images(out)
    write_transcripts(out)
    logger.info("fixtures written to %s", out)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "fixtures")
    args = parser.parse_args()
    setup_logger(level="INFO")
    write_fixtures(args.out.resolve())
    return 0


if __name__ == "__main__":
    sys.exit(main())
