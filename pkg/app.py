"""
Flowerbot - Command-line entry point
Inspects flower photos, runs the closed-loop robot simulator and the inspection link

Exit codes: 0 export grade / captured, 1 reject / not captured, 2 no flower,
64 usage, 65 bad input data, 66 missing input, 69 server unavailable,
74 I/O error, 76 protocol error, 78 configuration error.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Optional, Sequence

from dotenv import load_dotenv

from utils.config import Settings, load_settings
from utils.diagnose import (
    QualityReport, Verdict, annotate, batch_to_csv, error_row, inspect,
    report_row, report_to_json, summarize_batch,
)
from utils.errors import (
    ConfigError, ConnectionFailed, FlowerbotError, ImageError, ProtocolError,
    WorldFileError,
)
from utils.logger import LOG_LEVELS, get_logger, setup_logger
from utils.pilot import (
    CameraModel, MissionLimits, RobotState, load_world, mission_config, random_world, run_mission,
)
from utils.raster import PixelCoord, decode_image, encode_image, format_for_path
from utils.segment import calibrate_range
from utils.wire import DEFAULT_PORT, parse_endpoint, send_image, serve

logger = get_logger(__name__)

# ==================== EXIT CODES ====================
EXIT_OK = 0
EXIT_REJECT = 1
EXIT_NO_FLOWER = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66
EX_UNAVAILABLE = 69
EX_IOERR = 74
EX_PROTOCOL = 76
EX_CONFIG = 78

VERDICT_EXIT = {
    Verdict.EXPORT_GRADE: EXIT_OK,
    Verdict.REJECT: EXIT_REJECT,
    Verdict.NO_FLOWER: EXIT_NO_FLOWER,
}

IMAGE_SUFFIXES = (".png", ".ppm")
LOG_LEVEL_ENV_VAR = "FLOWERBOT_LOG_LEVEL"


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit 64 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


# ==================== HELPERS ====================

def read_image(path: str):
    """Load an image file; raises FileNotFoundError, OSError or ImageError."""
    return decode_image(Path(path).read_bytes())


def write_image(img, path: str) -> None:
    Path(path).write_bytes(encode_image(img, format_for_path(path)))


def pipeline_overrides(args) -> Dict[str, str]:
    overrides = {}
    if getattr(args, "mask", None):
        overrides["filter.mask"] = args.mask
    if getattr(args, "factor", None) is not None:
        overrides["resize.factor"] = str(args.factor)
    return overrides


def build_settings(args) -> Settings:
    return load_settings(args.config, pipeline_overrides(args))


def print_report(report: QualityReport, source: str) -> None:
    print(f"image: {source}")
    print(f"verdict: {report.verdict.value}")
    print(f"area_fraction: {report.area_fraction:.6f}")
    if report.blob is not None:
        blob = report.blob
        print(f"area: {blob.area}")
        print(f"perimeter: {blob.perimeter}")
        print(f"centroid: {blob.centroid[0]:.3f}, {blob.centroid[1]:.3f}")
        print(f"bbox: {blob.bbox.x_min},{blob.bbox.y_min} - {blob.bbox.x_max},{blob.bbox.y_max}")
        print(f"uniformity: {report.uniformity:.6f}")
        print(f"defect_ratio: {report.defect_ratio:.6f}")


def parse_sample(text: str) -> PixelCoord:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}") from None
    return PixelCoord(x, y)


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


# ==================== SUBCOMMANDS ====================

def cmd_inspect(args) -> int:
    settings = build_settings(args)
    img = read_image(args.image)
    report = inspect(img, settings.pipeline)
    print_report(report, args.image)

    if args.json:
        Path(args.json).write_bytes(report_to_json(report))
    if args.annotate:
        write_image(annotate(img, report), args.annotate)
    return VERDICT_EXIT[report.verdict]


def _inspect_file(path: Path, settings: Settings) -> dict:
    try:
        report = inspect(read_image(str(path)), settings.pipeline)
    except (OSError, ImageError) as exc:
        logger.warning("cannot inspect %s: %s", path.name, exc)
        return error_row(path.name)
    return report_row(path.name, report)


def cmd_batch(args) -> int:
    settings = build_settings(args)
    directory = Path(args.directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")

    files = sorted((p for p in directory.iterdir()
                    if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
                   key=lambda p: p.name)
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda p: _inspect_file(p, settings), files))

    if args.csv:
        batch_to_csv(rows, args.csv)
    else:
        sys.stdout.write(batch_to_csv(rows))

    summary = summarize_batch(rows)
    logger.info("batch summary: %s", summary)
    all_export = all(row["verdict"] == Verdict.EXPORT_GRADE.value for row in rows)
    return EXIT_OK if all_export else EXIT_REJECT


def cmd_simulate(args) -> int:
    # missions start from the simulator operating point; the config file refines it
    settings = load_settings(args.config, base=Settings(pipeline=mission_config()))
    if args.world:
        world = load_world(args.world)
    else:
        world = random_world(args.seed, settings.pilot)

    cam = CameraModel.from_settings(settings.pilot)
    limits = MissionLimits(max_steps=args.steps, capture_distance=settings.pilot.capture_distance)

    sink = None
    if args.frames:
        frames_dir = Path(args.frames)
        frames_dir.mkdir(parents=True, exist_ok=True)

        def sink(index, frame, report):
            write_image(annotate(frame, report), str(frames_dir / f"frame_{index:04d}.png"))

    log = run_mission(world, RobotState(), settings.pipeline, cam, limits, settings.pilot, sink)
    if args.csv:
        log.to_csv(args.csv)

    print(f"captured: {'yes' if log.captured else 'no'}")
    print(f"steps: {len(log.steps)}")
    print(f"final_distance: {log.final_distance:.6f}")
    return EXIT_OK if log.captured else EXIT_REJECT


def cmd_serve(args) -> int:
    settings = build_settings(args)
    serve((args.host, args.port), settings)
    return EXIT_OK


def cmd_send(args) -> int:
    endpoint = parse_endpoint(args.connect)
    img = read_image(args.image)
    report, command = send_image(endpoint, img, timeout=args.timeout)
    print_report(report, args.image)
    print(f"command: {command.v_left:.6f} {command.v_right:.6f}")
    if args.json:
        Path(args.json).write_bytes(report_to_json(report))
    return VERDICT_EXIT[report.verdict]


def cmd_calibrate(args) -> int:
    img = read_image(args.image)
    color_range = calibrate_range(img, args.sample, args.margin)
    dominance = color_range.dominance
    print(f"red.r_min = {color_range.r_min}")
    print(f"red.r_max = {color_range.r_max}")
    print(f"red.g_min = {color_range.g_min}")
    print(f"red.g_max = {color_range.g_max}")
    print(f"red.b_min = {color_range.b_min}")
    print(f"red.b_max = {color_range.b_max}")
    print(f"red.dominance_num = {dominance.numerator if dominance else 0}")
    print(f"red.dominance_denom = {dominance.denominator if dominance else 1}")
    return EXIT_OK


# ==================== PARSER ====================

def build_parser() -> CliParser:
    parser = CliParser(prog="flowerbot", description="Flower quality inspection toolkit")
    parser.add_argument("--log-level", type=str.upper, choices=sorted(LOG_LEVELS),
                        default=os.getenv(LOG_LEVEL_ENV_VAR, "WARNING").upper(),
                        help=f"stderr log level (default from ${LOG_LEVEL_ENV_VAR}, else WARNING)")
    parser.add_argument("--log-file", type=Path, help="also write DEBUG logs to this file")

    common = CliParser(add_help=False)
    common.add_argument("--config", help="key = value config file (default $FLOWERBOT_CONFIG)")

    pipeline = CliParser(add_help=False)
    pipeline.add_argument("--mask", help="mean filter mask, e.g. circular:5 or rect:5x5")
    pipeline.add_argument("--factor", type=positive_int, help="integer downscale factor")

    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("inspect", parents=[common, pipeline], help="inspect one image")
    p.add_argument("image", help="PNG or PPM file")
    p.add_argument("--json", metavar="OUT", help="write the quality report as JSON")
    p.add_argument("--annotate", metavar="OUT", help="write an annotated copy of the image")
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("batch", parents=[common, pipeline], help="inspect every image in a directory")
    p.add_argument("directory", help="directory of PNG/PPM files")
    p.add_argument("--csv", metavar="OUT", help="write the results CSV here (default stdout)")
    p.add_argument("--workers", type=positive_int, default=1, help="parallel inspections")
    p.set_defaults(handler=cmd_batch)

    p = sub.add_parser("simulate", parents=[common], help="run a closed-loop robot mission")
    p.add_argument("--world", metavar="FILE", help="world file (flower = x,y,radius,r,g,b)")
    p.add_argument("--seed", type=int, default=0, help="seed for a generated world when --world is absent")
    p.add_argument("--steps", type=positive_int, default=500, help="step limit")
    p.add_argument("--csv", metavar="OUT", help="write the mission log CSV")
    p.add_argument("--frames", metavar="DIR", help="dump annotated camera frames")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("serve", parents=[common, pipeline], help="run the inspection server")
    p.add_argument("--host", default="127.0.0.1", help="bind address")
    p.add_argument("--port", type=int, default=DEFAULT_PORT, help="TCP port")
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("send", help="send one image to an inspection server")
    p.add_argument("image", help="PNG or PPM file")
    p.add_argument("--connect", required=True, metavar="HOST:PORT", help="server endpoint")
    p.add_argument("--json", metavar="OUT", help="write the returned report as JSON")
    p.add_argument("--timeout", type=float, default=30.0, help="socket timeout in seconds")
    p.set_defaults(handler=cmd_send)

    p = sub.add_parser("calibrate", help="derive red.* config lines from sample pixels")
    p.add_argument("image", help="PNG or PPM file")
    p.add_argument("--sample", type=parse_sample, action="append", required=True,
                   metavar="X,Y", help="pixel on the flower (repeatable)")
    p.add_argument("--margin", type=int, default=20, help="widen each bound by this much")
    p.set_defaults(handler=cmd_calibrate)

    return parser


# ==================== MAIN ====================

def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    setup_logger(level=args.log_level, log_file=args.log_file)

    try:
        return args.handler(args)
    except WorldFileError as exc:
        print(f"flowerbot: bad world file: {exc}", file=sys.stderr)
        return EX_USAGE
    except ConfigError as exc:
        print(f"flowerbot: configuration error: {exc}", file=sys.stderr)
        return EX_CONFIG
    except ImageError as exc:
        print(f"flowerbot: bad image: {exc}", file=sys.stderr)
        return EX_DATAERR
    except ConnectionFailed as exc:
        print(f"flowerbot: {exc}", file=sys.stderr)
        return EX_UNAVAILABLE
    except ProtocolError as exc:
        print(f"flowerbot: protocol error: {exc}", file=sys.stderr)
        return EX_PROTOCOL
    except FileNotFoundError as exc:
        print(f"flowerbot: no such input: {exc.filename or exc}", file=sys.stderr)
        return EX_NOINPUT
    except (OSError, FlowerbotError) as exc:
        print(f"flowerbot: {exc}", file=sys.stderr)
        return EX_IOERR
    except ValueError as exc:
        print(f"flowerbot: {exc}", file=sys.stderr)
        return EX_USAGE


if __name__ == "__main__":
    sys.exit(main())
