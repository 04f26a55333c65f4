"""Image-quality metrics: windowed structural similarity and mean L1."""

from __future__ import annotations

import numpy as np
from scipy import signal

from .imaging import Raster, _check_same_shape

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 255.0

_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def luma_bt601(img: Raster) -> np.ndarray:
    """Luma on the 0..255 scale with ITU-R BT.601 weights."""
    data = img.data.astype(np.float64)
    wr, wg, wb = _LUMA_WEIGHTS
    return wr * data[:, :, 0] + wg * data[:, :, 1] + wb * data[:, :, 2]


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2D Gaussian weighting window."""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(a: Raster, b: Raster) -> float:
    """Mean local structural similarity over the luma channel.

    Gaussian-weighted 11x11 windows, fully-inside positions only, with the
    standard stabilizers C1=(K1 L)^2 and C2=(K2 L)^2 at L=255.
    """
    _check_same_shape(a, b, "ssim")
    height, width = a.data.shape[:2]
    if min(height, width) < SSIM_WINDOW:
        raise ValueError(
            f"ssim needs images at least {SSIM_WINDOW}x{SSIM_WINDOW}, "
            f"got {height}x{width}"
        )

    luma_a = luma_bt601(a)
    luma_b = luma_bt601(b)
    window = gaussian_window()
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2

    def local_mean(x):
        return signal.correlate2d(x, window, mode="valid")

    mu_a = local_mean(luma_a)
    mu_b = local_mean(luma_b)
    var_a = local_mean(luma_a * luma_a) - mu_a * mu_a
    var_b = local_mean(luma_b * luma_b) - mu_b * mu_b
    cov = local_mean(luma_a * luma_b) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def mean_l1(a, b) -> float:
    """Mean absolute difference on the float view.

    Accepts Raster or float array inputs so exact float identities are
    expressible without uint8 quantization.
    """
    fa = a.to_float() if isinstance(a, Raster) else np.asarray(a, dtype=np.float64)
    fb = b.to_float() if isinstance(b, Raster) else np.asarray(b, dtype=np.float64)
    if fa.shape != fb.shape:
        raise ValueError(f"mean_l1 shape mismatch: {fa.shape} vs {fb.shape}")
    return float(np.mean(np.abs(fa - fb)))
