"""Sketch-guided local image editing."""

from ._core import (
    CheckpointError,
    ConfigError,
    DataError,
    DimensionError,
    Error,
    Model,
    apply_warp,
    blend,
    extract_edges,
    l1_error,
    make_training_pair,
    psnr,
    rasterize_strokes,
    ssim,
    static_partial,
    style_partial,
    toy_image,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataError",
    "DimensionError",
    "Error",
    "Model",
    "apply_warp",
    "blend",
    "extract_edges",
    "l1_error",
    "make_training_pair",
    "psnr",
    "rasterize_strokes",
    "ssim",
    "static_partial",
    "style_partial",
    "toy_image",
]
