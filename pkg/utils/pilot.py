"""
Closed-loop simulation module for the flowerbot inspection toolkit
Synthetic camera, visual-servo controller and differential-drive kinematics
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import PilotSettings, PipelineConfig
from .diagnose import QualityReport, Verdict, inspect
from .draw import fill_disc
from .errors import NonPositiveDt, WorldFileError
from .filter import Rect
from .logger import get_logger
from .raster import RasterImage

logger = get_logger(__name__)

# One control step per camera frame at 15 fps
FRAME_DT = 1.0 / 15.0
BACKGROUND = (20, 20, 20)
DEFAULT_FLOWER_COLOR = (220, 30, 40)
STRAIGHT_EPS = 1e-9

MISSION_COLUMNS = ["step", "x", "y", "heading", "verdict", "v_l", "v_r"]


def normalize_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    return math.pi if wrapped <= -math.pi else wrapped


@dataclass(frozen=True)
class RobotState:
    """Pose in the world frame; heading counterclockwise from +x."""
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class CameraModel:
    """Forward-facing pinhole camera."""
    width: int = 640
    height: int = 480
    fov: float = math.radians(60.0)
    mount_height: float = 0.3

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"camera dims must be >= 1, got {self.width}x{self.height}")
        if not 0.0 < self.fov < math.pi:
            raise ValueError(f"fov must lie in (0, pi), got {self.fov}")

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(self.fov / 2.0)

    @classmethod
    def from_settings(cls, settings: PilotSettings, width: int = 640, height: int = 480) -> "CameraModel":
        return cls(width, height, settings.fov, settings.mount_height)


@dataclass(frozen=True)
class Flower:
    """Flat flower head; ``height`` is the head's height above the ground."""
    x: float
    y: float
    radius: float
    color: Tuple[int, int, int] = DEFAULT_FLOWER_COLOR
    height: float = 0.3

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"flower radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class World:
    flowers: Tuple[Flower, ...] = ()
    bounds: Tuple[float, float, float, float] = (-10.0, -10.0, 10.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "flowers", tuple(self.flowers))
        x0, y0, x1, y1 = self.bounds
        if x1 <= x0 or y1 <= y0:
            raise ValueError(f"bounds must have positive extent, got {self.bounds}")
        for f in self.flowers:
            if not (x0 <= f.x <= x1 and y0 <= f.y <= y1):
                raise ValueError(f"flower at ({f.x}, {f.y}) lies outside bounds {self.bounds}")

    def nearest_distance(self, state: RobotState) -> float:
        if not self.flowers:
            return math.inf
        return min(math.hypot(f.x - state.x, f.y - state.y) for f in self.flowers)


@dataclass(frozen=True)
class MotionCommand:
    """Wheel rim speeds in m/s."""
    v_left: float = 0.0
    v_right: float = 0.0


# ==================== CAMERA ====================

def render_view(world: World, state: RobotState, cam: Optional[CameraModel] = None) -> RasterImage:
    """
    Render what the robot camera sees of a flat-disc world.

    Column follows bearing linearly across the field of view; apparent radius
    is radius/distance times the focal length in pixels. Nearer flowers are
    drawn over farther ones; flowers behind the camera or entirely outside
    the frame are skipped.
    """
    cam = cam or CameraModel()
    canvas = np.empty((cam.height, cam.width, 3), dtype=np.uint8)
    canvas[:, :] = BACKGROUND

    half_w = cam.width / 2.0
    visible = []
    for flower in world.flowers:
        dx, dy = flower.x - state.x, flower.y - state.y
        distance = math.hypot(dx, dy)
        forward = dx * math.cos(state.heading) + dy * math.sin(state.heading)
        if forward <= 0.0 or distance <= 0.0:
            continue
        # positive bearing means the flower is to the right
        bearing = -normalize_angle(math.atan2(dy, dx) - state.heading)
        cx = half_w + (bearing / (cam.fov / 2.0)) * half_w
        cy = cam.height / 2.0 + cam.focal_px * (cam.mount_height - flower.height) / distance
        radius_px = (flower.radius / distance) * cam.focal_px
        if cx + radius_px < 0 or cx - radius_px > cam.width - 1:
            continue
        visible.append((distance, cx, cy, radius_px, flower.color))

    for _distance, cx, cy, radius_px, color in sorted(visible, key=lambda v: -v[0]):
        fill_disc(canvas, cx, cy, radius_px, color)
    return RasterImage(canvas)


def bearing_from_centroid(cx: float, cam: Optional[CameraModel] = None) -> float:
    """Angle of an image column from the optical axis; positive to the right."""
    cam = cam or CameraModel()
    half_w = cam.width / 2.0
    return ((cx - half_w) / half_w) * (cam.fov / 2.0)


# ==================== CONTROL ====================

def _clamp(value: float, limit: float) -> float:
    return max(-limit, min(limit, value))


def steer(bearing: float, area_fraction: float, settings: Optional[PilotSettings] = None) -> MotionCommand:
    """
    Proportional visual-servo law.

    Turn rate opposes the bearing; forward speed falls linearly to zero as
    the flower's area fraction reaches the target fraction.
    """
    s = settings or PilotSettings()
    omega_max = 2.0 * s.v_max / s.track
    angular = _clamp(-s.k_omega * bearing, omega_max)
    linear = s.k_v * (1.0 - min(area_fraction / s.target_fraction, 1.0))
    if area_fraction >= s.target_fraction:
        linear = 0.0
    half_track = s.track / 2.0
    return MotionCommand(
        v_left=_clamp(linear - angular * half_track, s.v_max),
        v_right=_clamp(linear + angular * half_track, s.v_max),
    )


def search_command(settings: Optional[PilotSettings] = None) -> MotionCommand:
    """Rotate in place counterclockwise at the configured search rate."""
    s = settings or PilotSettings()
    wheel = _clamp(s.search_omega * s.track / 2.0, s.v_max)
    return MotionCommand(-wheel, wheel)


def step(state: RobotState, cmd: MotionCommand, dt: float = FRAME_DT, track: float = 0.3) -> RobotState:
    """
    Advance a differential-drive pose by one time step along the exact arc.

    Raises:
        NonPositiveDt: dt <= 0
    """
    if not dt > 0:
        raise NonPositiveDt(f"dt must be positive, got {dt}")
    v = (cmd.v_left + cmd.v_right) / 2.0
    omega = (cmd.v_right - cmd.v_left) / track
    theta = state.heading
    if abs(omega) < STRAIGHT_EPS:
        return RobotState(state.x + v * dt * math.cos(theta), state.y + v * dt * math.sin(theta), theta)
    radius = v / omega
    return RobotState(
        state.x + radius * (math.sin(theta + omega * dt) - math.sin(theta)),
        state.y + radius * (-math.cos(theta + omega * dt) + math.cos(theta)),
        theta + omega * dt,
    )


# ==================== MISSIONS ====================

@dataclass(frozen=True)
class MissionLimits:
    max_steps: int = 500
    capture_distance: float = 0.2


@dataclass(frozen=True)
class MissionStep:
    step: int
    state: RobotState
    verdict: Verdict
    command: MotionCommand


@dataclass
class MissionLog:
    """Per-step record of a closed-loop run."""
    steps: List[MissionStep] = field(default_factory=list)
    captured: bool = False
    capture_step: Optional[int] = None
    final_state: Optional[RobotState] = None
    final_distance: float = math.inf

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(s.step, s.state.x, s.state.y, s.state.heading, s.verdict.value,
              s.command.v_left, s.command.v_right) for s in self.steps],
            columns=MISSION_COLUMNS,
        )

    def to_csv(self, path=None) -> Optional[str]:
        """Write (or return) the CSV with six-decimal floats."""
        return self.to_frame().to_csv(path, index=False, float_format="%.6f", lineterminator="\n")

    def distances(self, world: World) -> List[float]:
        return [world.nearest_distance(s.state) for s in self.steps]


FrameSink = Callable[[int, RasterImage, QualityReport], None]


def mission_config() -> PipelineConfig:
    """Pipeline operating point for the simulator: half resolution, 3x3 mask, small-target detection."""
    return PipelineConfig(resize_factor=2, mask=Rect(3, 3), min_area_fraction=0.0005)


def run_mission(
    world: World,
    start: RobotState = RobotState(),
    cfg: Optional[PipelineConfig] = None,
    cam: Optional[CameraModel] = None,
    limits: MissionLimits = MissionLimits(),
    settings: Optional[PilotSettings] = None,
    frame_sink: Optional[FrameSink] = None,
) -> MissionLog:
    """
    Render, inspect, steer and move until capture or the step limit.

    Capture is checked before every step: the mission ends once the nearest
    flower center is closer than ``limits.capture_distance``. With no flower
    in view the robot rotates in place.

    Args:
        world: Flowers to find
        start: Initial pose
        cfg: Pipeline settings (``mission_config()`` when omitted)
        cam: Camera model (640x480 from ``settings`` when omitted)
        limits: Step ceiling and capture radius
        settings: Controller constants
        frame_sink: Optional callback receiving (step, frame, report)

    Returns:
        MissionLog with one entry per executed step
    """
    settings = settings or PilotSettings()
    cfg = cfg or mission_config()
    cam = cam or CameraModel.from_settings(settings)

    log = MissionLog()
    state = start
    for index in range(limits.max_steps):
        distance = world.nearest_distance(state)
        if distance < limits.capture_distance:
            log.captured, log.capture_step = True, index
            break

        frame = render_view(world, state, cam)
        report = inspect(frame, cfg)
        if frame_sink is not None:
            frame_sink(index, frame, report)

        if report.detected:
            bearing = bearing_from_centroid(report.blob.centroid[0], cam)
            command = steer(bearing, report.area_fraction, settings)
        else:
            command = search_command(settings)

        log.steps.append(MissionStep(index, state, report.verdict, command))
        state = step(state, command, FRAME_DT, settings.track)
    else:
        if world.nearest_distance(state) < limits.capture_distance:
            log.captured, log.capture_step = True, limits.max_steps

    log.final_state = state
    log.final_distance = world.nearest_distance(state)
    logger.info("mission %s after %d step(s), final distance %.3f m",
                "captured" if log.captured else "exhausted", len(log.steps), log.final_distance)
    return log


# ==================== WORLDS ====================

def _floats(line_no: int, raw: str, count: int) -> List[float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != count:
        raise WorldFileError(f"line {line_no}: expected {count} comma-separated values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise WorldFileError(f"line {line_no}: {exc}") from exc


def parse_world(text: str) -> World:
    """
    Parse a world file.

    Lines are ``flower = x,y,radius,r,g,b`` or ``bounds = x0,y0,x1,y1``;
    blank lines and ``#`` comments are ignored.

    Raises:
        WorldFileError: malformed line or invalid geometry
    """
    flowers, bounds = [], None
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip().lower()
        if not sep:
            raise WorldFileError(f"line {line_no}: expected 'key = value', got {line!r}")
        if key == "flower":
            x, y, radius, r, g, b = _floats(line_no, raw, 6)
            if not all(0 <= c <= 255 and c == int(c) for c in (r, g, b)):
                raise WorldFileError(f"line {line_no}: color channels must be integers in [0, 255]")
            if radius <= 0:
                raise WorldFileError(f"line {line_no}: radius must be positive")
            flowers.append(Flower(x, y, radius, (int(r), int(g), int(b))))
        elif key == "bounds":
            bounds = tuple(_floats(line_no, raw, 4))
        else:
            raise WorldFileError(f"line {line_no}: unknown key {key!r}")

    try:
        return World(tuple(flowers), bounds) if bounds else World(tuple(flowers))
    except ValueError as exc:
        raise WorldFileError(str(exc)) from exc


def load_world(path) -> World:
    return parse_world(Path(path).read_text(encoding="utf-8"))


def random_world(seed: int, settings: Optional[PilotSettings] = None) -> World:
    """
    One flower of radius 0.05 m, 1-3 m ahead of the origin pose, at a bearing
    within a quarter of the field of view. Deterministic per seed.
    """
    s = settings or PilotSettings()
    rng = np.random.default_rng(seed)
    distance = float(rng.uniform(1.0, 3.0))
    angle = float(rng.uniform(-s.fov / 4.0, s.fov / 4.0))
    return World((Flower(distance * math.cos(angle), distance * math.sin(angle), 0.05),))
