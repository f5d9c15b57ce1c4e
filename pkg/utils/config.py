"""
Configuration module for the flowerbot inspection toolkit
Loads the line-based ``key = value`` config file and builds typed settings

Precedence: compiled defaults < config file < explicit overrides (CLI flags).
"""

import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values

from .blob import Connectivity
from .errors import ConfigError
from .filter import Circular, Kernel, MaskShape, Rect, make_kernel, parse_shape
from .logger import get_logger
from .morph import StructuringElement, parse_sequence
from .segment import ColorRange

logger = get_logger(__name__)

CONFIG_ENV_VAR = "FLOWERBOT_CONFIG"

Roi = Tuple[int, int, int, int]


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the inspection pipeline."""
    resize_factor: int = 1
    roi: Optional[Roi] = None
    enhance_contrast: bool = False
    mask: MaskShape = Circular(5)
    color_range: ColorRange = field(default_factory=ColorRange)
    se_shape: MaskShape = Rect(3, 3)
    morph_sequence: Tuple[str, ...] = ("open", "close")
    connectivity: Connectivity = Connectivity.EIGHT
    min_area_fraction: float = 0.02
    max_area_fraction: float = 0.8
    min_uniformity: float = 0.85
    max_defect_ratio: float = 0.1

    def __post_init__(self):
        if int(self.resize_factor) != self.resize_factor or self.resize_factor < 1:
            raise ConfigError(f"resize.factor must be a positive integer, got {self.resize_factor!r}")
        if self.roi is not None:
            if len(self.roi) != 4 or self.roi[2] < 1 or self.roi[3] < 1:
                raise ConfigError(f"roi must be x,y,w,h with positive w and h, got {self.roi!r}")
        for name in ("min_area_fraction", "max_area_fraction", "min_uniformity", "max_defect_ratio"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0) or math.isnan(value):
                raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")
        if self.min_area_fraction > self.max_area_fraction:
            raise ConfigError("min_area_fraction must not exceed max_area_fraction")
        object.__setattr__(self, "morph_sequence", parse_sequence(",".join(self.morph_sequence)))
        if self.roi is not None:
            object.__setattr__(self, "roi", tuple(int(v) for v in self.roi))
        try:
            make_kernel(self.mask)
            StructuringElement.from_shape(self.se_shape)
            object.__setattr__(self, "connectivity", Connectivity(self.connectivity))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def kernel(self) -> Kernel:
        return make_kernel(self.mask)

    @property
    def structuring_element(self) -> StructuringElement:
        return StructuringElement.from_shape(self.se_shape)


@dataclass(frozen=True)
class PilotSettings:
    """Camera and controller constants of the closed-loop simulator."""
    fov_deg: float = 60.0
    mount_height: float = 0.3
    track: float = 0.3
    v_max: float = 0.5
    k_v: float = 0.5
    k_omega: float = 2.0
    target_fraction: float = 0.3
    capture_distance: float = 0.2
    search_omega: float = 0.6

    def __post_init__(self):
        if not (0.0 < self.fov_deg < 180.0):
            raise ConfigError(f"pilot.fov_deg must lie in (0, 180), got {self.fov_deg}")
        for name in ("track", "v_max", "target_fraction", "capture_distance"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"pilot.{name} must be positive, got {getattr(self, name)}")
        if self.target_fraction > 1:
            raise ConfigError(f"pilot.target_fraction must be <= 1, got {self.target_fraction}")
        for name in ("k_v", "k_omega", "search_omega", "mount_height"):
            if getattr(self, name) < 0:
                raise ConfigError(f"pilot.{name} must be >= 0, got {getattr(self, name)}")

    @property
    def fov(self) -> float:
        return math.radians(self.fov_deg)


@dataclass(frozen=True)
class Settings:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    pilot: PilotSettings = field(default_factory=PilotSettings)


# ==================== FLATTENING ====================

def _fmt(value: float) -> str:
    return repr(float(value))


def pipeline_to_dict(cfg: PipelineConfig) -> Dict[str, str]:
    """Flatten a pipeline config into its config-file keys, values as strings."""
    cr = cfg.color_range
    dominance = cr.dominance if cr.dominance is not None else Fraction(0)
    return {
        "resize.factor": str(cfg.resize_factor),
        "roi": ",".join(str(v) for v in cfg.roi) if cfg.roi else "",
        "enhance.contrast": "true" if cfg.enhance_contrast else "false",
        "filter.mask": str(cfg.mask),
        "red.r_min": str(cr.r_min),
        "red.r_max": str(cr.r_max),
        "red.g_min": str(cr.g_min),
        "red.g_max": str(cr.g_max),
        "red.b_min": str(cr.b_min),
        "red.b_max": str(cr.b_max),
        "red.dominance_num": str(dominance.numerator),
        "red.dominance_denom": str(dominance.denominator),
        "morph.se": str(cfg.se_shape),
        "morph.sequence": ",".join(cfg.morph_sequence),
        "blob.connectivity": str(int(cfg.connectivity)),
        "verdict.min_area_fraction": _fmt(cfg.min_area_fraction),
        "verdict.max_area_fraction": _fmt(cfg.max_area_fraction),
        "verdict.min_uniformity": _fmt(cfg.min_uniformity),
        "verdict.max_defect_ratio": _fmt(cfg.max_defect_ratio),
    }


def pilot_to_dict(settings: PilotSettings) -> Dict[str, str]:
    return {f"pilot.{name}": _fmt(getattr(settings, name)) for name in PilotSettings.__dataclass_fields__}


PIPELINE_KEYS = tuple(pipeline_to_dict(PipelineConfig()))
PILOT_KEYS = tuple(pilot_to_dict(PilotSettings()))
KNOWN_KEYS = PIPELINE_KEYS + PILOT_KEYS


def _int(key: str, raw: str) -> int:
    try:
        return int(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc


def _float(key: str, raw: str) -> float:
    try:
        return float(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc


def _bool(key: str, raw: str) -> bool:
    text = raw.strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {raw!r}")


def _roi(key: str, raw: str) -> Optional[Roi]:
    if not raw.strip():
        return None
    parts = raw.split(",")
    if len(parts) != 4:
        raise ConfigError(f"{key}: expected x,y,w,h, got {raw!r}")
    return tuple(_int(key, p) for p in parts)


def apply_overrides(settings: Settings, values: Mapping[str, Optional[str]]) -> Settings:
    """
    Return new settings with the given flat keys replaced.

    Raises:
        ConfigError: unknown key, missing value or invalid value
    """
    unknown = sorted(set(values) - set(KNOWN_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    for key, raw in values.items():
        if raw is None:
            raise ConfigError(f"{key}: missing value (expected 'key = value')")

    pipeline = settings.pipeline
    cr = pipeline.color_range
    changes = {}
    range_changes = {}
    dominance = [cr.dominance.numerator if cr.dominance else 0,
                 cr.dominance.denominator if cr.dominance else 1]

    for key, raw in values.items():
        if key == "resize.factor":
            changes["resize_factor"] = _int(key, raw)
        elif key == "roi":
            changes["roi"] = _roi(key, raw)
        elif key == "enhance.contrast":
            changes["enhance_contrast"] = _bool(key, raw)
        elif key == "filter.mask":
            changes["mask"] = parse_shape(raw)
        elif key.startswith("red.dominance_"):
            dominance[0 if key.endswith("num") else 1] = _int(key, raw)
        elif key.startswith("red."):
            range_changes[key[len("red."):]] = _int(key, raw)
        elif key == "morph.se":
            changes["se_shape"] = parse_shape(raw)
        elif key == "morph.sequence":
            changes["morph_sequence"] = parse_sequence(raw)
        elif key == "blob.connectivity":
            conn = _int(key, raw)
            if conn not in (4, 8):
                raise ConfigError(f"{key}: expected 4 or 8, got {raw!r}")
            changes["connectivity"] = Connectivity(conn)
        elif key.startswith("verdict."):
            changes[key[len("verdict."):]] = _float(key, raw)

    if range_changes or any(k.startswith("red.dominance_") for k in values):
        num, den = dominance
        if den <= 0 or num < 0:
            raise ConfigError(f"red.dominance_num/denom must be >= 0 and > 0, got {num}/{den}")
        try:
            changes["color_range"] = replace(cr, dominance=Fraction(num, den) if num else None,
                                             **range_changes)
        except ValueError as exc:
            raise ConfigError(f"red range: {exc}") from exc

    pilot_changes = {key[len("pilot."):]: _float(key, raw)
                     for key, raw in values.items() if key.startswith("pilot.")}

    try:
        return Settings(
            pipeline=replace(pipeline, **changes) if changes else pipeline,
            pilot=replace(settings.pilot, **pilot_changes) if pilot_changes else settings.pilot,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def resolve_config_path(path: Optional[Union[str, Path]] = None) -> Optional[Path]:
    """Explicit path first, then the FLOWERBOT_CONFIG environment variable."""
    if path:
        return Path(path)
    env_path = os.getenv(CONFIG_ENV_VAR)
    return Path(env_path) if env_path else None


def load_settings(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Optional[str]]] = None,
    base: Optional[Settings] = None
) -> Settings:
    """
    Build settings from defaults, an optional config file and overrides.

    Args:
        path: Config file (falls back to $FLOWERBOT_CONFIG)
        overrides: Flat keys that win over the file, e.g. from CLI flags
        base: Starting point instead of the compiled defaults

    Returns:
        Validated Settings

    Raises:
        ConfigError: unreadable file or invalid content
    """
    settings = base or Settings()
    config_path = resolve_config_path(path)
    if config_path is not None:
        if not config_path.is_file():
            raise ConfigError(f"config file not found: {config_path}")
        values = dotenv_values(config_path, interpolate=False)
        logger.info("loaded %d config value(s) from %s", len(values), config_path)
        settings = apply_overrides(settings, values)
    if overrides:
        settings = apply_overrides(settings, overrides)
    return settings
