import json

import numpy as np
import pytest

from tryongeo.imaging import Raster
from tryongeo.tps import (
    ControlGrid,
    TpsCoefficients,
    WarpParams,
    build_system,
    normalized_to_pixels,
    pixel_grid_normalized,
    solve_coefficients,
    warp_float,
    warp_image,
)

from oracles import dense_tps_warp, tps_point


class TestControlGrid:
    def test_rejects_small_k(self):
        with pytest.raises(ValueError):
            ControlGrid(1)

    def test_k3_lattice_values(self):
        pts = ControlGrid(3).points
        assert pts.shape == (9, 2)
        assert pts[0].tolist() == [-1.0, -1.0]
        assert pts[1].tolist() == [0.0, -1.0]  # x varies fastest
        assert pts[3].tolist() == [-1.0, 0.0]
        assert pts[8].tolist() == [1.0, 1.0]

    def test_default_k(self):
        assert ControlGrid().k == 5


class TestWarpParams:
    def test_identity_equals_lattice(self):
        g = ControlGrid(4)
        assert np.array_equal(WarpParams.identity(g).theta, g.points)

    def test_shape_validation(self):
        g = ControlGrid(3)
        with pytest.raises(ValueError):
            WarpParams(g, np.zeros((4, 2)))

    def test_rejects_non_finite(self):
        g = ControlGrid(2)
        theta = g.points.copy()
        theta[0, 0] = np.nan
        with pytest.raises(ValueError):
            WarpParams(g, theta)

    def test_json_round_trip(self):
        rng = np.random.default_rng(17)
        g = ControlGrid(5)
        params = WarpParams(g, g.points + rng.normal(0, 0.1, (25, 2)))
        doc = params.to_json()
        assert set(json.loads(doc)) == {"k", "theta"}
        back = WarpParams.from_json(doc)
        assert back.grid.k == 5
        assert np.array_equal(back.theta, params.theta)


class TestBuildSystem:
    def test_minimal_grid_is_7x7_nonsingular(self):
        system = build_system(ControlGrid(2))
        assert system.matrix.shape == (7, 7)
        system.solve(ControlGrid(2).points)  # solvable

    def test_duplicate_points_raise(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [-1.0, 1.0]])
        with pytest.raises(ValueError):
            build_system(pts)

    def test_solution_reproduces_rhs(self):
        rng = np.random.default_rng(19)
        system = build_system(ControlGrid(5))
        theta = system.points + rng.normal(0, 0.05, (25, 2))
        co = system.solve(theta)
        sol = np.concatenate([co.weights, co.affine.T], axis=0)
        rhs = np.concatenate([theta, np.zeros((3, 2))], axis=0)
        assert np.abs(system.matrix @ sol - rhs).max() < 1e-8


class TestSolveCoefficients:
    def test_identity_theta(self):
        g = ControlGrid(5)
        co = solve_coefficients(build_system(g), g.points)
        expect_affine = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        assert np.abs(co.affine - expect_affine).max() < 1e-8
        assert np.abs(co.weights).max() <= 1e-8

    def test_pure_translation(self):
        g = ControlGrid(5)
        co = solve_coefficients(build_system(g), g.points + np.array([0.1, 0.0]))
        expect_affine = np.array([[0.1, 1.0, 0.0], [0.0, 0.0, 1.0]])
        assert np.abs(co.affine - expect_affine).max() < 1e-8
        assert np.abs(co.weights).max() <= 1e-8

    def test_general_affine_has_zero_weights(self):
        g = ControlGrid(5)
        ang = np.deg2rad(30.0)
        rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
        theta = (g.points * 2.0) @ rot.T + np.array([0.03, -0.07])
        co = solve_coefficients(build_system(g), theta)
        assert np.abs(co.weights).max() <= 1e-8

    def test_interpolates_control_points(self):
        rng = np.random.default_rng(23)
        g = ControlGrid(5)
        system = build_system(g)
        theta = g.points + rng.normal(0, 0.08, (25, 2))
        co = system.solve(theta)
        mapped = system.transform(co, g.points)
        assert np.abs(mapped - theta).max() < 1e-6

    def test_side_conditions(self):
        rng = np.random.default_rng(29)
        system = build_system(ControlGrid(4))
        theta = system.points + rng.normal(0, 0.1, (16, 2))
        co = system.solve(theta)
        assert np.abs(co.weights.sum(axis=0)).max() <= 1e-8
        assert np.abs(system.points.T @ co.weights).max() <= 1e-8

    def test_matches_pointwise_reference(self):
        rng = np.random.default_rng(31)
        g = ControlGrid(4)
        system = build_system(g)
        theta = g.points + rng.normal(0, 0.06, (16, 2))
        co = system.solve(theta)
        queries = rng.uniform(-1.2, 1.2, size=(40, 2))
        mine = system.transform(co, queries)
        for q, got in zip(queries, mine):
            expect = tps_point(system.points, co.affine, co.weights, q[0], q[1])
            assert np.abs(got - np.asarray(expect)).max() < 1e-10

    def test_rejects_non_finite_theta(self):
        system = build_system(ControlGrid(3))
        theta = system.points.copy()
        theta[4, 1] = np.inf
        with pytest.raises(ValueError):
            system.solve(theta)


class TestCoefficientValidation:
    def test_affine_shape(self):
        with pytest.raises(ValueError):
            TpsCoefficients(affine=np.zeros((3, 2)), weights=np.zeros((4, 2)))

    def test_weights_shape(self):
        with pytest.raises(ValueError):
            TpsCoefficients(affine=np.zeros((2, 3)), weights=np.zeros(8))


class TestCoordinateHelpers:
    def test_pixel_grid_corners(self):
        grid = pixel_grid_normalized(4, 3).reshape(4, 3, 2)
        assert grid[0, 0].tolist() == [-1.0, -1.0]
        assert grid[3, 2].tolist() == [1.0, 1.0]
        assert grid[0, 1].tolist() == [0.0, -1.0]

    def test_round_trip(self):
        rng = np.random.default_rng(37)
        coords = rng.uniform(-1, 1, (20, 2))
        px = normalized_to_pixels(coords, 7, 9)
        assert np.allclose(px[:, 0], (coords[:, 0] + 1) / 2 * 8)
        assert np.allclose(px[:, 1], (coords[:, 1] + 1) / 2 * 6)


class TestWarpImage:
    def test_identity_bit_exact(self):
        rng = np.random.default_rng(41)
        src = Raster(rng.integers(0, 256, (32, 24, 3), dtype=np.uint8))
        out = warp_image(src, WarpParams.identity(ControlGrid(5)))
        assert np.array_equal(out.data, src.data)

    def test_identity_float_view_within_1e12(self):
        rng = np.random.default_rng(43)
        src = rng.random((64, 48, 3))
        out = warp_float(src, WarpParams.identity(ControlGrid(5)))
        assert np.abs(out - src).max() <= 1e-12

    def test_translation_matches_shifted_source(self):
        rng = np.random.default_rng(47)
        src = Raster(rng.integers(0, 256, (32, 24, 3), dtype=np.uint8))
        shift = 4
        g = ControlGrid(5)
        # Source positions moved right: output pixel q samples src at q+shift.
        params = WarpParams(g, g.points + np.array([2.0 * shift / (24 - 1), 0.0]))
        out = warp_image(src, params)
        got = out.data[:, : 24 - shift].astype(int)
        expect = src.data[:, shift:].astype(int)
        assert np.abs(got - expect).max() <= 1

    def test_matches_dense_evaluation(self):
        rng = np.random.default_rng(53)
        src = rng.random((20, 16, 3))
        g = ControlGrid(4)
        theta = g.points + rng.normal(0, 0.04, (16, 2))
        system = build_system(g)
        co = system.solve(theta)
        mine = warp_float(src, WarpParams(g, theta))
        expect = dense_tps_warp(src, system.points, co.affine, co.weights)
        assert np.abs(mine - expect).max() < 1e-10

    def test_single_point_perturbation_is_localized(self):
        # Smooth ramp so sub-pixel displacements far from the perturbed
        # point stay below one 8-bit step.
        h, w = 64, 48
        yy, xx = np.indices((h, w), dtype=np.float64)
        ramp = 0.1 + 0.5 * xx / (w - 1) + 0.3 * yy / (h - 1)
        g = ControlGrid(5)
        base = warp_float(ramp, WarpParams.identity(g))

        center = 12  # middle lattice point of the 5x5 grid
        theta = g.points.copy()
        theta[center] += np.array([0.08, 0.0])
        pert = warp_float(ramp, WarpParams(g, theta))

        delta = np.abs(pert - base)
        lsb = 1.0 / 255.0
        cx = (g.points[center, 0] + 1) / 2 * (w - 1)
        cy = (g.points[center, 1] + 1) / 2 * (h - 1)
        dist = np.hypot(xx - cx, yy - cy)
        assert (delta > lsb).any()
        assert dist[delta > lsb].max() < 16.0  # measured 12.35
        assert delta[dist < 8.0].max() > 4 * lsb  # strong change near the point

    def test_gray_image_supported(self):
        rng = np.random.default_rng(59)
        src = rng.random((16, 12))
        out = warp_float(src, WarpParams.identity(ControlGrid(3)))
        assert out.shape == (16, 12)
        assert np.abs(out - src).max() <= 1e-12
