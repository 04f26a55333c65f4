"""Deterministic virtual try-on geometry engine.

Fits a constrained thin-plate-spline warp of a garment onto a target
region, composes semantic-layout masks that decide which pixels are
preserved, covered or generated, assembles the final image with bit-exact
preservation, and scores poses by complexity.
"""

__version__ = "0.1.0"

from .imaging import AlphaMap, BinaryMask, LabelMap, Raster
from .layout import CompositeLayout, LayoutBundle, compose_layout, oracle_bundle
from .metrics import mean_l1, ssim
from .score import PoseKeypoints, complexity, partition, reference_points
from .tps import ControlGrid, WarpParams, warp_image
from .warpfit import ConstraintConfig, FitConfig, FitReport, fit_warp

__all__ = [
    "AlphaMap",
    "BinaryMask",
    "CompositeLayout",
    "ConstraintConfig",
    "ControlGrid",
    "FitConfig",
    "FitReport",
    "LabelMap",
    "LayoutBundle",
    "PoseKeypoints",
    "Raster",
    "WarpParams",
    "complexity",
    "compose_layout",
    "fit_warp",
    "mean_l1",
    "oracle_bundle",
    "partition",
    "reference_points",
    "ssim",
    "warp_image",
]
