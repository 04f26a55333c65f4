"""Thin-plate-spline transforms over a fixed regular control lattice.

The warp is parameterized backwards: control points live on a regular
lattice in normalized output coordinates and ``theta`` gives their fitted
positions in the source image, so the kernel system depends only on the
lattice and is factorized once per grid.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .imaging import Raster, bilinear_sample

# Relative pivot threshold below which the kernel system counts as singular.
_PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class ControlGrid:
    """k x k regular lattice spanning [-1, 1]^2, row-major."""

    k: int = 5

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"grid side count must be >= 2, got {self.k}")

    @cached_property
    def points(self) -> np.ndarray:
        """(k^2, 2) lattice positions, x varying fastest."""
        axis = np.linspace(-1.0, 1.0, self.k)
        xs, ys = np.meshgrid(axis, axis)
        pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
        pts.setflags(write=False)
        return pts


@dataclass(frozen=True)
class WarpParams:
    """A control grid plus fitted source-space control positions."""

    grid: ControlGrid
    theta: np.ndarray  # (k^2, 2) float64, normalized source coordinates

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        n = self.grid.k * self.grid.k
        if theta.shape != (n, 2):
            raise ValueError(f"theta must be ({n}, 2), got {theta.shape}")
        if not np.isfinite(theta).all():
            raise ValueError("theta contains non-finite values")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def identity(cls, grid: ControlGrid) -> "WarpParams":
        return cls(grid, grid.points.copy())

    def to_json(self) -> str:
        return json.dumps({"k": self.grid.k, "theta": self.theta.tolist()}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WarpParams":
        doc = json.loads(text)
        return cls(ControlGrid(int(doc["k"])), np.asarray(doc["theta"], dtype=np.float64))


@dataclass(frozen=True)
class TpsCoefficients:
    """Solved spline: 2x3 affine part (constant, x, y) and n x 2 kernel weights."""

    affine: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        affine = np.asarray(self.affine, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if affine.shape != (2, 3):
            raise ValueError(f"affine must be (2, 3), got {affine.shape}")
        if weights.ndim != 2 or weights.shape[1] != 2:
            raise ValueError(f"weights must be (n, 2), got {weights.shape}")
        object.__setattr__(self, "affine", affine)
        object.__setattr__(self, "weights", weights)


def _kernel(r2: np.ndarray) -> np.ndarray:
    """U(r) = r^2 log(r^2); the r -> 0 limit is 0."""
    out = np.zeros_like(r2)
    positive = r2 > 0.0
    out[positive] = r2[positive] * np.log(r2[positive])
    return out


class TpsSystem:
    """Factorized (n+3) x (n+3) kernel system over fixed control points.

    Immutable after construction; solves and basis evaluations against it
    are safe to run concurrently.
    """

    def __init__(self, points: np.ndarray):
        points = np.array(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError(f"control points must be (n, 2), got {points.shape}")
        if points.shape[0] < 3:
            raise ValueError("need at least 3 control points")
        if not np.isfinite(points).all():
            raise ValueError("control points contain non-finite values")
        n = points.shape[0]

        diff = points[:, None, :] - points[None, :, :]
        k_mat = _kernel((diff * diff).sum(axis=2))
        p_mat = np.concatenate([np.ones((n, 1)), points], axis=1)
        full = np.zeros((n + 3, n + 3))
        full[:n, :n] = k_mat
        full[:n, n:] = p_mat
        full[n:, :n] = p_mat.T

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(full)
        pivots = np.abs(np.diag(lu))
        if pivots.min() < _PIVOT_RTOL * pivots.max():
            raise ValueError("degenerate control points: kernel system is singular")

        self.points = points
        self.matrix = full
        self._lu = (lu, piv)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def _solve_refined(self, rhs: np.ndarray) -> np.ndarray:
        # One step of iterative refinement keeps the identity warp exact
        # to near machine precision.
        sol = sla.lu_solve(self._lu, rhs)
        residual = rhs - self.matrix @ sol
        return sol + sla.lu_solve(self._lu, residual)

    def solve(self, theta: np.ndarray) -> TpsCoefficients:
        """Coefficients of the spline mapping lattice point i to theta[i]."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n, 2):
            raise ValueError(f"theta must be ({self.n}, 2), got {theta.shape}")
        if not np.isfinite(theta).all():
            raise ValueError("theta contains non-finite values")
        rhs = np.concatenate([theta, np.zeros((3, 2))], axis=0)
        sol = self._solve_refined(rhs)
        return TpsCoefficients(affine=sol[self.n :].T, weights=sol[: self.n])

    @cached_property
    def solve_operator(self) -> np.ndarray:
        """(n+3, n) matrix S with full-coefficient vector = S @ theta."""
        rhs = np.concatenate([np.eye(self.n), np.zeros((3, self.n))], axis=0)
        return self._solve_refined(rhs)

    def basis(self, query: np.ndarray) -> np.ndarray:
        """(m, n+3) rows [U(|q - p_1|) ... U(|q - p_n|), 1, qx, qy]."""
        query = np.asarray(query, dtype=np.float64)
        diff = query[:, None, :] - self.points[None, :, :]
        phi = np.empty((query.shape[0], self.n + 3))
        phi[:, : self.n] = _kernel((diff * diff).sum(axis=2))
        phi[:, self.n] = 1.0
        phi[:, self.n + 1 :] = query
        return phi

    def transform(self, coeffs: TpsCoefficients, query: np.ndarray) -> np.ndarray:
        """Map (m, 2) query points through the solved spline."""
        sol = np.concatenate([coeffs.weights, coeffs.affine.T], axis=0)
        return self.basis(query) @ sol


def build_system(grid) -> TpsSystem:
    """Build and factorize the kernel system for a grid or raw point set."""
    if isinstance(grid, ControlGrid):
        return TpsSystem(grid.points)
    return TpsSystem(grid)


def solve_coefficients(system: TpsSystem, theta: np.ndarray) -> TpsCoefficients:
    return system.solve(theta)


def pixel_grid_normalized(height: int, width: int) -> np.ndarray:
    """(H*W, 2) normalized coordinates of every pixel center, row-major.

    Pixel (0, 0) maps to (-1, -1) and (W-1, H-1) to (1, 1).
    """
    xs = np.linspace(-1.0, 1.0, width)
    ys = np.linspace(-1.0, 1.0, height)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def normalized_to_pixels(coords: np.ndarray, height: int, width: int) -> np.ndarray:
    """Map normalized [-1, 1] coordinates to pixel coordinates (x, y)."""
    out = np.empty_like(coords)
    out[..., 0] = (coords[..., 0] + 1.0) / 2.0 * (width - 1)
    out[..., 1] = (coords[..., 1] + 1.0) / 2.0 * (height - 1)
    return out


def warp_float(src: np.ndarray, params: WarpParams, system: TpsSystem | None = None) -> np.ndarray:
    """Backward-warp a float image: sample the source at f_theta(q) per pixel q.

    src may be (H, W) or (H, W, C). The output has the same shape.
    """
    if system is None:
        system = build_system(params.grid)
    height, width = src.shape[0], src.shape[1]
    coeffs = system.solve(params.theta)
    source_norm = system.transform(coeffs, pixel_grid_normalized(height, width))
    source_px = normalized_to_pixels(source_norm, height, width)
    sampled = bilinear_sample(src, source_px[:, 0], source_px[:, 1])
    return sampled.reshape(src.shape)


def warp_image(src: Raster, params: WarpParams) -> Raster:
    """Warp an 8-bit raster; output rounded back to 8 bits."""
    return Raster.from_float(warp_float(src.to_float(), params))
