"""Shared scaffolding for fit tests: synthetic scenes and kink-free sampling."""

import math

import numpy as np

from tryongeo.imaging import Raster, bilinear_sample
from tryongeo.tps import (
    ControlGrid,
    WarpParams,
    build_system,
    normalized_to_pixels,
    pixel_grid_normalized,
)
from tryongeo.warpfit import fit_warp

from oracles import second_order_constraint


def rect_raster(h, w, r0, r1, c0, c1, value=255):
    """Black frame with a solid rectangle over rows [r0, r1), cols [c0, c1)."""
    img = np.zeros((h, w, 3), np.uint8)
    img[r0:r1, c0:c1] = value
    return Raster(img)


def striped_raster(h, w, r0, r1, c0, c1, period=8):
    """Rectangle filled with vertical stripes (half period on, half off)."""
    img = np.zeros((h, w, 3), np.uint8)
    stripe = ((np.arange(w) // (period // 2)) % 2) * 255
    img[r0:r1, c0:c1] = stripe[None, c0:c1, None].astype(np.uint8)
    return Raster(img)


def staged_fit(src, tgt, ccfg, stages, grid=None):
    """Chain fits with a decaying learning rate; returns the last report.

    stages: sequence of (iterations, learning_rate) pairs. Each stage warm
    starts from the previous stage's fitted params.
    """
    from tryongeo.warpfit import FitConfig

    params = WarpParams.identity(grid or ControlGrid())
    report = None
    for iterations, lr in stages:
        report = fit_warp(
            src, tgt, ccfg, FitConfig(iterations=iterations, learning_rate=lr), init=params
        )
        params = report.params
    return report


def _constraint_margins_ok(theta, k, delta):
    """True when no |.| argument of the layout penalty is near its kink."""
    l3 = second_order_constraint(theta, k, 0.1, 0.1)
    if abs(l3 - delta) < 1e-3:
        return False
    for r in range(1, k - 1):
        for c in range(1, k - 1):
            p = theta[r * k + c]
            for a_i, b_i in (((r - 1) * k + c, (r + 1) * k + c), (r * k + c - 1, r * k + c + 1)):
                a, b = theta[a_i], theta[b_i]
                da = math.hypot(p[0] - a[0], p[1] - a[1])
                db = math.hypot(p[0] - b[0], p[1] - b[1])
                if abs(da - db) < 1e-3:
                    return False
                cross = (a[1] - p[1]) * (b[0] - p[0]) - (b[1] - p[1]) * (a[0] - p[0])
                if abs(cross) < 1e-3:
                    return False
    return True


def sample_smooth_config(seed, k=4, h=16, w=12, delta=0.0, max_tries=500):
    """Random (src, target, params) away from every objective kink.

    Keeps finite differences valid: no sampling coordinate near a pixel
    boundary, no pixel residual near a sign change, no constraint term near
    an absolute-value kink, and the hinge strictly active or inactive.
    """
    rng = np.random.default_rng(seed)
    src = Raster(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))
    tgt = Raster(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))
    grid = ControlGrid(k)
    system = build_system(grid)
    basis_op = system.basis(pixel_grid_normalized(h, w)) @ system.solve_operator
    src_float = src.to_float()
    tgt_flat = tgt.to_float().reshape(-1, 3)

    for _ in range(max_tries):
        theta = grid.points + rng.normal(0.0, 0.05, (k * k, 2))
        px = normalized_to_pixels(basis_op @ theta, h, w)
        if np.abs(px - np.round(px)).min() < 5e-4:
            continue
        values = bilinear_sample(src_float, px[:, 0], px[:, 1])
        if np.abs(values - tgt_flat).min() < 5e-4:
            continue
        if not _constraint_margins_ok(theta, k, delta):
            continue
        return src, tgt, WarpParams(grid, theta)
    raise RuntimeError(f"no kink-free configuration found for seed {seed}")
