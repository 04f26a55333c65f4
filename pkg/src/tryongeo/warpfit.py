"""Constrained warp fitting.

Fits source-space control positions so the warped clothing image matches a
target, by first-order optimization of

    total = max(L3 - delta, 0) + pixel_weight * L4

where L3 is a second-order difference penalty on the control layout (it is
zero exactly when the layout is an affine image of the lattice) and L4 is
the mean absolute pixel difference between the warp and the target.

The warp coordinates are linear in theta (see tps), so gradients flow
analytically through the solve, the sampling, and the piecewise-linear
penalty, with subgradient 0 at the kinks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imaging import Raster
from .tps import (
    ControlGrid,
    WarpParams,
    build_system,
    normalized_to_pixels,
    pixel_grid_normalized,
)

_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ConstraintConfig:
    """Weights of the layout penalty: distance term, slope term, hinge margin."""

    lambda_r: float = 0.1
    lambda_s: float = 0.1
    delta: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.lambda_r) and self.lambda_r >= 0):
            raise ValueError(f"lambda_r must be finite and >= 0, got {self.lambda_r}")
        if not (np.isfinite(self.lambda_s) and self.lambda_s >= 0):
            raise ValueError(f"lambda_s must be finite and >= 0, got {self.lambda_s}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings: adaptive-moment descent with bias correction."""

    iterations: int = 500
    learning_rate: float = 2e-4
    betas: tuple = (0.5, 0.999)
    pixel_weight: float = 1.0
    converge_tol: float = 1e-3

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        # 0 is allowed so a no-op fit stays expressible.
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ValueError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        b1, b2 = self.betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise ValueError(f"betas must lie in [0, 1), got {self.betas}")
        if not self.pixel_weight >= 0:
            raise ValueError(f"pixel_weight must be >= 0, got {self.pixel_weight}")


@dataclass(frozen=True)
class FitReport:
    """Loss trajectories (index 0 = initial params) and the fitted warp."""

    params: WarpParams
    l3: np.ndarray
    hinged: np.ndarray
    l4: np.ndarray
    total: np.ndarray
    converged: bool

    def to_json_dict(self) -> dict:
        return {
            "k": self.params.grid.k,
            "theta": self.params.theta.tolist(),
            "l3": self.l3.tolist(),
            "hinged": self.hinged.tolist(),
            "l4": self.l4.tolist(),
            "total": self.total.tolist(),
            "converged": self.converged,
        }


def _interior_neighbors(k: int):
    """Index arrays (point, top, bottom, left, right) over interior lattice points."""
    rows, cols = np.meshgrid(np.arange(1, k - 1), np.arange(1, k - 1), indexing="ij")
    center = (rows * k + cols).ravel()
    return center, center - k, center + k, center - 1, center + 1


def _constraint_terms(theta: np.ndarray, k: int, lambda_r: float, lambda_s: float):
    """Penalty value and its gradient w.r.t. theta, shape (k^2, 2)."""
    center, top, bottom, left, right = _interior_neighbors(k)
    value = 0.0
    grad = np.zeros_like(theta)

    for a_idx, b_idx in ((top, bottom), (left, right)):
        p = theta[center]
        a = theta[a_idx]
        b = theta[b_idx]

        da_vec = p - a
        db_vec = p - b
        da = np.linalg.norm(da_vec, axis=1)
        db = np.linalg.norm(db_vec, axis=1)
        diff = da - db
        value += lambda_r * np.abs(diff).sum()

        sign_r = np.sign(diff)[:, None]
        # Unit vectors; subgradient 0 when a neighbor coincides with p.
        ua = np.where(da[:, None] > 0, da_vec / np.maximum(da, 1e-300)[:, None], 0.0)
        ub = np.where(db[:, None] > 0, db_vec / np.maximum(db, 1e-300)[:, None], 0.0)
        np.add.at(grad, center, lambda_r * sign_r * (ua - ub))
        np.add.at(grad, a_idx, -lambda_r * sign_r * ua)
        np.add.at(grad, b_idx, lambda_r * sign_r * ub)

        cross = (a[:, 1] - p[:, 1]) * (b[:, 0] - p[:, 0]) - (b[:, 1] - p[:, 1]) * (
            a[:, 0] - p[:, 0]
        )
        value += lambda_s * np.abs(cross).sum()

        sign_s = np.sign(cross)
        gc = np.empty_like(p)
        gc[:, 0] = b[:, 1] - a[:, 1]
        gc[:, 1] = a[:, 0] - b[:, 0]
        ga = np.empty_like(p)
        ga[:, 0] = -(b[:, 1] - p[:, 1])
        ga[:, 1] = b[:, 0] - p[:, 0]
        gb = np.empty_like(p)
        gb[:, 0] = a[:, 1] - p[:, 1]
        gb[:, 1] = -(a[:, 0] - p[:, 0])
        np.add.at(grad, center, lambda_s * sign_s[:, None] * gc)
        np.add.at(grad, a_idx, lambda_s * sign_s[:, None] * ga)
        np.add.at(grad, b_idx, lambda_s * sign_s[:, None] * gb)

    return value, grad


def constraint_l3(params: WarpParams, cfg: ConstraintConfig) -> float:
    """Second-order difference penalty over interior lattice points."""
    k = params.grid.k
    if k < 3:
        raise ValueError(f"constraint needs k >= 3 (no interior points for k={k})")
    value, _ = _constraint_terms(params.theta, k, cfg.lambda_r, cfg.lambda_s)
    return float(value)


def pixel_loss_l4(warped: Raster, target: Raster) -> float:
    """Mean absolute difference over all pixels and channels, float view."""
    if (warped.height, warped.width) != (target.height, target.width):
        raise ValueError(
            f"pixel loss: dimension mismatch {warped.height}x{warped.width} "
            f"vs {target.height}x{target.width}"
        )
    return float(np.abs(warped.to_float() - target.to_float()).mean())


def _bilinear_value_grad(img: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Zero-padded bilinear values and coordinate partials at (x, y).

    img is (H, W, C); x, y are flat coordinate arrays. Returns three
    (m, C) arrays: value, d/dx, d/dy. Matches imaging.bilinear_sample.
    """
    h, w, _ = img.shape
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]

    def grab(yi, xi):
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        vals = img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
        return np.where(inside[:, None], vals, 0.0)

    v00 = grab(y0, x0)
    v01 = grab(y0, x0 + 1)
    v10 = grab(y0 + 1, x0)
    v11 = grab(y0 + 1, x0 + 1)

    value = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11)
    ddx = (1 - fy) * (v01 - v00) + fy * (v11 - v10)
    ddy = (1 - fx) * (v10 - v00) + fx * (v11 - v01)
    return value, ddx, ddy


class _WarpPlan:
    """Shared precomputation for repeated objective evaluations.

    The sampling coordinates are linear in theta: coords = basis_op @ theta,
    so basis_op is computed once per (grid, image size).
    """

    def __init__(self, grid: ControlGrid, height: int, width: int):
        self.grid = grid
        self.height = height
        self.width = width
        system = build_system(grid)
        queries = pixel_grid_normalized(height, width)
        self.basis_op = system.basis(queries) @ system.solve_operator

    def evaluate(self, theta, src_float, target_float, ccfg, pixel_weight, with_grad):
        """Objective pieces at theta; gradient too when with_grad is set."""
        height, width = self.height, self.width
        source_norm = self.basis_op @ theta
        source_px = normalized_to_pixels(source_norm, height, width)

        value, ddx, ddy = _bilinear_value_grad(src_float, source_px[:, 0], source_px[:, 1])
        residual = value - target_float.reshape(value.shape)
        l4 = float(np.abs(residual).mean())

        l3, l3_grad = _constraint_terms(theta, self.grid.k, ccfg.lambda_r, ccfg.lambda_s)
        l3 = float(l3)
        hinged = max(l3 - ccfg.delta, 0.0)
        total = hinged + pixel_weight * l4
        if not with_grad:
            return total, l3, hinged, l4, None

        scale = np.sign(residual) / residual.size
        coord_grad = np.empty_like(source_px)
        coord_grad[:, 0] = (scale * ddx).sum(axis=1) * (width - 1) / 2.0
        coord_grad[:, 1] = (scale * ddy).sum(axis=1) * (height - 1) / 2.0
        grad = pixel_weight * (self.basis_op.T @ coord_grad)
        if hinged > 0.0:
            grad += l3_grad
        return total, l3, hinged, l4, grad


def _check_fit_inputs(src: Raster, target: Raster) -> None:
    if (src.height, src.width) != (target.height, target.width):
        raise ValueError(
            f"warp fit: dimension mismatch {src.height}x{src.width} "
            f"vs {target.height}x{target.width}"
        )


def warp_objective(
    params: WarpParams,
    src: Raster,
    target: Raster,
    ccfg: ConstraintConfig = ConstraintConfig(),
    fcfg: FitConfig = FitConfig(),
):
    """(total, L3, L4) of the fitting objective at the given params."""
    _check_fit_inputs(src, target)
    plan = _WarpPlan(params.grid, src.height, src.width)
    total, l3, _, l4, _ = plan.evaluate(
        params.theta, src.to_float(), target.to_float(), ccfg, fcfg.pixel_weight, False
    )
    return total, l3, l4


def objective_gradient(
    params: WarpParams,
    src: Raster,
    target: Raster,
    ccfg: ConstraintConfig = ConstraintConfig(),
    fcfg: FitConfig = FitConfig(),
) -> np.ndarray:
    """Gradient of warp_objective w.r.t. theta, shape (k^2, 2)."""
    _check_fit_inputs(src, target)
    plan = _WarpPlan(params.grid, src.height, src.width)
    _, _, _, _, grad = plan.evaluate(
        params.theta, src.to_float(), target.to_float(), ccfg, fcfg.pixel_weight, True
    )
    return grad


def fit_warp(
    src: Raster,
    target: Raster,
    ccfg: ConstraintConfig = ConstraintConfig(),
    fcfg: FitConfig = FitConfig(),
    init: WarpParams | None = None,
) -> FitReport:
    """Fit the warp by adaptive-moment gradient descent from init (default identity)."""
    _check_fit_inputs(src, target)
    if init is None:
        init = WarpParams.identity(ControlGrid())
    plan = _WarpPlan(init.grid, src.height, src.width)
    src_float = src.to_float()
    target_float = target.to_float()

    theta = init.theta.copy()
    beta1, beta2 = fcfg.betas
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)

    steps = fcfg.iterations
    l3_track = np.empty(steps + 1)
    hinged_track = np.empty(steps + 1)
    l4_track = np.empty(steps + 1)
    total_track = np.empty(steps + 1)

    for t in range(steps + 1):
        with_grad = t < steps
        total, l3, hinged, l4, grad = plan.evaluate(
            theta, src_float, target_float, ccfg, fcfg.pixel_weight, with_grad
        )
        if not np.isfinite(total):
            raise FloatingPointError(f"non-finite loss at iteration {t}")
        l3_track[t] = l3
        hinged_track[t] = hinged
        l4_track[t] = l4
        total_track[t] = total
        if not with_grad:
            break
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        m_hat = m / (1 - beta1 ** (t + 1))
        v_hat = v / (1 - beta2 ** (t + 1))
        theta = theta - fcfg.learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)

    return FitReport(
        params=WarpParams(init.grid, theta),
        l3=l3_track,
        hinged=hinged_track,
        l4=l4_track,
        total=total_track,
        converged=bool(total_track[-1] < fcfg.converge_tol),
    )
