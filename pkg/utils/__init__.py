"""
Utils package for the flowerbot inspection toolkit

This package contains the image pipeline (raster, filter, segment, morph,
blob, diagnose), the closed-loop robot simulator (pilot) and the framed
inspection link (wire).
"""

from .logger import get_logger, setup_logger

__all__ = ["get_logger", "setup_logger"]
