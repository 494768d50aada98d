import numpy as np
import pytest

from ballstab.core.exceptions import DomainError
from ballstab.engine.grid import Grid, radial_first_derivative, radial_second_derivative


def test_node_layout(grid):
    assert grid.shape == (33, 64)
    assert grid.r[0] == 1.0
    assert grid.r[-1] == pytest.approx(3.0, abs=1e-15)
    assert grid.y.shape == (2, 33, 64)
    np.testing.assert_allclose(np.hypot(*grid.y[:, 0, :]), 1.0, atol=1e-15)


def test_index_sets_partition_the_grid(grid):
    all_nodes = np.sort(np.concatenate([grid.boundary_index, grid.interior_index]))
    assert np.array_equal(all_nodes, np.arange(grid.size))
    assert len(grid.boundary_index) == 2 * grid.n_theta


def test_area_is_eight_pi(grid, coarse_grid):
    assert grid.area == pytest.approx(8.0 * np.pi, rel=1e-13)
    assert coarse_grid.integrate(np.ones(coarse_grid.shape)) == pytest.approx(8.0 * np.pi, rel=1e-13)


def test_inner_normal_points_into_the_ball(grid):
    n = grid.inner_normal
    np.testing.assert_allclose(np.hypot(*n), 1.0)
    # body surface point plus a small step along n lands inside the unit disk
    inside = grid.y[:, 0, :] + 0.1 * n
    assert np.all(np.hypot(*inside) < 1.0)


def test_constant_fields_have_zero_derivatives(grid):
    c = np.full(grid.shape, 2.5)
    assert np.max(np.abs(grid.grad(c))) < 1e-12
    assert np.max(np.abs(grid.hessian(c))) < 1e-11


def test_laplacian_of_radius_squared_is_exact(grid):
    f = grid.rr**2
    np.testing.assert_allclose(grid.laplacian(f), 4.0, atol=1e-11)
    H = grid.hessian(f)
    np.testing.assert_allclose(H[0, 0], 2.0, atol=1e-10)
    np.testing.assert_allclose(H[0, 1], 0.0, atol=1e-10)
    np.testing.assert_allclose(grid.grad(f), 2.0 * grid.y, atol=1e-11)


def test_cartesian_derivatives_are_second_order(coarse_grid):
    def error(g: Grid) -> float:
        x, y = g.y
        f = np.sin(x) * np.cos(0.5 * y)
        fx = np.cos(x) * np.cos(0.5 * y)
        fy = -0.5 * np.sin(x) * np.sin(0.5 * y)
        return float(np.max(np.abs(g.grad(f) - np.stack([fx, fy]))))

    fine = coarse_grid.refined()
    ratio = error(coarse_grid) / error(fine)
    assert ratio > 3.0


def test_divergence_and_grad_div_agree_with_jacobian(grid):
    x, y = grid.y
    v = np.stack([x * y, np.sin(y)])
    J = grid.jacobian(v)
    np.testing.assert_allclose(grid.div(v), J[0, 0] + J[1, 1], atol=1e-12)
    exact = np.stack([np.zeros_like(y), 1.0 - np.sin(y)])
    np.testing.assert_allclose(grid.grad_div(v), exact, atol=0.05)


def test_refined_grid(coarse_grid):
    fine = coarse_grid.refined()
    assert fine.shape == (33, 64)
    assert fine.R == coarse_grid.R


def test_small_grids_rejected():
    with pytest.raises(DomainError):
        Grid(3, 32, 3.0)
    with pytest.raises(DomainError):
        Grid(17, 32, 1.0)
    with pytest.raises(DomainError):
        radial_first_derivative(2, 0.1)
    with pytest.raises(DomainError):
        radial_second_derivative(3, 0.1)
