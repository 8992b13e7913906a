"""Learning spatially varying total-variation weights for image denoising."""

from ._core import (
    ConfigError,
    Error,
    IoError,
    ShapeError,
    SolverError,
    add_noise,
    denoise,
    learn,
    load_image,
    load_lambda,
    phantom,
    psnr,
    save_image,
    save_lambda,
    ssim,
    total_variation,
)

__all__ = [
    "ConfigError",
    "Error",
    "IoError",
    "ShapeError",
    "SolverError",
    "add_noise",
    "denoise",
    "learn",
    "load_image",
    "load_lambda",
    "phantom",
    "psnr",
    "save_image",
    "save_lambda",
    "ssim",
    "total_variation",
]
