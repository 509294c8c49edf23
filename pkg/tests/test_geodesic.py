"""Eikonal solver: closed-form oracles, refraction, residuals, persistence."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from powerpath.errors import GridError
from powerpath.geodesic import (CostGrid, DistanceField, GeodesicEstimate,
                                build_cost_grid, dist_p, eikonal_residual,
                                interpolate, load_distance_field,
                                save_distance_field, solve_eikonal)
from powerpath.geometry import (ConformalParams, Domain, bump_density,
                                uniform_density)

UNIT_BOX = Domain("box", (1.0, 1.0))
UNIT_TORUS = Domain("torus", (1.0, 1.0))


def uniform_grid(domain: Domain, res: int, cost: float = 1.0) -> CostGrid:
    shape = (res,) * domain.dimension
    return CostGrid(domain, res, np.full(shape, cost),
                    wraparound=domain.kind == "torus")


class TestCostGrid:
    def test_resolution_floor(self):
        with pytest.raises(GridError):
            uniform_grid(UNIT_BOX, 4)

    def test_shape_checked(self):
        with pytest.raises(GridError):
            CostGrid(UNIT_BOX, 16, np.ones((16, 8)), wraparound=False)

    def test_nonpositive_cost_rejected(self):
        vals = np.ones((16, 16))
        vals[3, 3] = 0.0
        with pytest.raises(GridError):
            CostGrid(UNIT_BOX, 16, vals, wraparound=False)

    def test_cell_center_round_trip(self):
        grid = uniform_grid(UNIT_BOX, 32)
        cell = (5, 17)
        assert grid.cell_of(grid.center_of(cell)) == cell

    def test_build_from_density(self):
        f = bump_density(UNIT_BOX)
        params = ConformalParams(p=2.0, d=2)
        grid = build_cost_grid(UNIT_BOX, f, params, 32)
        center_cost = grid.values[16, 16]
        corner_cost = grid.values[0, 0]
        # cost = f^(-1/2): higher density at the bump center -> lower cost
        assert center_cost < corner_cost


class TestUniformCostOracle:
    def test_euclidean_distance_recovered(self):
        res = 64
        grid = uniform_grid(UNIT_BOX, res)
        src = np.array([0.5, 0.5])
        field = solve_eikonal(grid, src)
        cx = (np.arange(res) + 0.5) / res
        X, Y = np.meshgrid(cx, cx, indexing="ij")
        true = np.hypot(X - 0.5, Y - 0.5)
        err = np.abs(field.values - true)
        assert err.max() <= 2.0 / res

    def test_cost_scales_linearly(self):
        src = np.array([0.3, 0.4])
        f1 = solve_eikonal(uniform_grid(UNIT_BOX, 32, 1.0), src)
        f3 = solve_eikonal(uniform_grid(UNIT_BOX, 32, 3.0), src)
        assert np.allclose(f3.values, 3.0 * f1.values, rtol=1e-12)

    def test_torus_wraparound_distance(self):
        res = 64
        grid = uniform_grid(UNIT_TORUS, res)
        field = solve_eikonal(grid, np.array([0.0, 0.5]))
        # the far side of the seam is close through wraparound
        near_seam = interpolate(field, [0.95, 0.5])
        assert near_seam == pytest.approx(0.05, abs=2.0 / res)
        antipodal = interpolate(field, [0.5, 0.5])
        assert antipodal == pytest.approx(0.5, abs=2.0 / res)

    def test_three_dimensional_solve(self):
        dom = Domain("box", (1.0, 1.0, 1.0))
        res = 24
        grid = CostGrid(dom, res, np.ones((res,) * 3), wraparound=False)
        field = solve_eikonal(grid, np.array([0.5, 0.5, 0.5]))
        val = interpolate(field, [0.9, 0.5, 0.5])
        assert val == pytest.approx(0.4, abs=2.5 / res)


class TestSnellRefraction:
    def test_two_region_crossing(self):
        # cost c1 for x < 0.5, c2 beyond; the optimal crossing point follows
        # from one-dimensional minimization of the broken-ray travel time
        res = 128
        c1, c2 = 1.0, 2.0
        xs = (np.arange(res) + 0.5) / res
        vals = np.where(xs[:, None] < 0.5, c1, c2) * np.ones((res, res))
        grid = CostGrid(UNIT_BOX, res, vals, wraparound=False)
        src = np.array([0.25, 0.3])
        tgt = np.array([0.75, 0.7])
        field = solve_eikonal(grid, src)

        def travel(yc):
            return c1 * math.hypot(0.5 - src[0], yc - src[1]) + \
                c2 * math.hypot(tgt[0] - 0.5, tgt[1] - yc)

        oracle = minimize_scalar(travel, bounds=(0.0, 1.0), method="bounded",
                                 options={"xatol": 1e-12}).fun
        val = interpolate(field, tgt)
        assert val == pytest.approx(oracle, rel=0.02)


class TestResidual:
    def test_consistent_field_has_small_residual(self):
        grid = uniform_grid(UNIT_BOX, 32)
        field = solve_eikonal(grid, np.array([0.5, 0.5]))
        assert eikonal_residual(field) < 1e-9

    def test_corrupted_field_detected(self):
        grid = uniform_grid(UNIT_BOX, 32)
        field = solve_eikonal(grid, np.array([0.5, 0.5]))
        bad = field.values.copy()
        bad[2, 2] += 0.5
        corrupted = DistanceField(field.source, bad, field.resolution, grid)
        assert eikonal_residual(corrupted) > 0.1


class TestInterpolate:
    def test_exact_at_cell_centers(self):
        grid = uniform_grid(UNIT_BOX, 16)
        field = solve_eikonal(grid, np.array([0.5, 0.5]))
        cell = (3, 11)
        assert interpolate(field, grid.center_of(cell)) == pytest.approx(
            field.values[cell])

    def test_between_centers_is_average(self):
        grid = uniform_grid(UNIT_BOX, 16)
        vals = np.arange(256, dtype=float).reshape(16, 16) + 1.0
        field = DistanceField(np.array([0.5, 0.5]), vals, 16, grid)
        a = grid.center_of((4, 4))
        b = grid.center_of((5, 4))
        mid = (a + b) / 2.0
        assert interpolate(field, mid) == pytest.approx(
            (vals[4, 4] + vals[5, 4]) / 2.0)


class TestDistP:
    def test_p_one_closed_form(self):
        f = bump_density(UNIT_BOX)
        est = dist_p(UNIT_BOX, f, ConformalParams(p=1.0, d=2), [0.2, 0.2],
                     [0.8, 0.8])
        assert est.value == pytest.approx(math.hypot(0.6, 0.6))
        assert est.error_estimate == 0.0
        assert not est.refinement_warning

    def test_constant_density_closed_form(self):
        dom = Domain("box", (2.0, 2.0))
        f = uniform_density(dom)  # f = 1/4
        params = ConformalParams(p=3.0, d=2)
        est = dist_p(dom, f, params, [0.5, 0.5], [1.5, 0.5])
        # distance = |x-y| * f^((1-p)/d) = 1 * 4
        assert est.value == pytest.approx(4.0)
        assert est.error_estimate == 0.0

    def test_torus_uniform_wraparound(self):
        f = uniform_density(UNIT_TORUS)
        est = dist_p(UNIT_TORUS, f, ConformalParams(p=2.0, d=2), [0.25, 0.5],
                     [0.75, 0.5])
        assert est.value == pytest.approx(0.5)

    def test_bump_shortens_paths_through_it(self):
        # higher density on the way -> cheaper conformal metric at p > 1
        f = bump_density(UNIT_BOX, amplitude=2.0, width=0.08)
        params = ConformalParams(p=2.0, d=2)
        est = dist_p(UNIT_BOX, f, params, [0.3, 0.5], [0.7, 0.5], 64)
        base = 0.4 * f.inf_bound ** params.cost_exponent
        assert est.value < base
        assert est.error_estimate >= 0.0

    def test_refinement_gap_shrinks_with_resolution(self):
        f = bump_density(UNIT_BOX, amplitude=2.0)
        params = ConformalParams(p=2.0, d=2)
        lo = dist_p(UNIT_BOX, f, params, [0.2, 0.2], [0.8, 0.8], 32)
        hi = dist_p(UNIT_BOX, f, params, [0.2, 0.2], [0.8, 0.8], 128)
        assert hi.error_estimate < lo.error_estimate
        assert abs(hi.value - lo.value) < 0.05 * hi.value

    def test_low_resolution_rejected_for_varying_cost(self):
        f = bump_density(UNIT_BOX)
        with pytest.raises(GridError):
            dist_p(UNIT_BOX, f, ConformalParams(p=2.0, d=2), [0.2, 0.2],
                   [0.8, 0.8], 8)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        grid = uniform_grid(UNIT_BOX, 16)
        field = solve_eikonal(grid, np.array([0.25, 0.75]))
        path = tmp_path / "field.bin"
        save_distance_field(field, path)
        values, sidecar = load_distance_field(path)
        assert np.array_equal(values, field.values)
        assert sidecar["resolution"] == 16
        assert sidecar["domain"]["kind"] == "box"
        assert sidecar["source"] == [0.25, 0.75]
