from dataclasses import replace

import numpy as np
import pytest

from ballstab.core.config import PhysicalParams
from ballstab.core.exceptions import DomainError, MapDegenerateError
from ballstab.engine.initial_data import bump_mass, density_bump
from ballstab.engine.kinematics import identity_flowmap
from ballstab.engine.physics import body_mass_inertia, mean_density, pressure, stress, total_mass
from ballstab.models.state import FluidState


def test_pressure_examples(params):
    assert pressure(1.0, params) == 1.0
    assert pressure(2.0, params) == 4.0
    assert pressure(0.0, params) == 0.0


def test_pressure_rejects_negative_density(params):
    with pytest.raises(DomainError):
        pressure(np.array([1.0, -1e-3]), params)


def test_pressure_monotone(params):
    rho = np.linspace(0.0, 5.0, 501)
    assert np.all(np.diff(pressure(rho, params)) > 0)


def test_stress_examples(params):
    np.testing.assert_array_equal(stress(np.zeros((2, 2)), 1.0, params), -np.eye(2))
    np.testing.assert_array_equal(stress(np.eye(2), 0.0, params), 2.0 * np.eye(2))
    shear = np.array([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(stress(shear, 0.0, params), [[0.0, 1.0], [1.0, 0.0]])


def test_stress_is_symmetric_nodewise():
    rng = np.random.default_rng(7)
    params = PhysicalParams(mu=0.7, lam=0.3)
    grad_u = rng.normal(size=(2, 2, 5, 9))
    p = rng.uniform(0.5, 2.0, size=(5, 9))
    sigma = stress(grad_u, p, params)
    np.testing.assert_array_equal(sigma, np.swapaxes(sigma, 0, 1))


def test_body_mass_inertia():
    m, J = body_mass_inertia(PhysicalParams(dim=3))
    assert m == pytest.approx(4.0 * np.pi / 3.0)
    assert J == pytest.approx(8.0 * np.pi / 15.0)
    m, J = body_mass_inertia(PhysicalParams())
    assert (m, J) == (pytest.approx(np.pi), pytest.approx(np.pi / 2.0))
    m2, J2 = body_mass_inertia(PhysicalParams(rho_body=2.0))
    assert (m2, J2) == (pytest.approx(2.0 * m), pytest.approx(2.0 * J))
    with pytest.raises(DomainError):
        body_mass_inertia(PhysicalParams(dim=4))


def test_total_mass_identity_map(grid):
    flowmap = identity_flowmap(grid)
    u = np.zeros((2,) + grid.shape)
    rest = FluidState(rho_tilde=np.zeros(grid.shape), u_tilde=u)
    assert total_mass(rest, flowmap, grid, 1.0) == pytest.approx(8.0 * np.pi, rel=1e-13)
    heavy = FluidState(rho_tilde=np.full(grid.shape, 0.5), u_tilde=u)
    assert total_mass(heavy, flowmap, grid, 1.0) == pytest.approx(12.0 * np.pi, rel=1e-13)


def test_total_mass_rejects_degenerate_map(grid):
    flowmap = identity_flowmap(grid)
    detJ = flowmap.detJ.copy()
    detJ[3, 5] = -1e-3
    fluid = FluidState(rho_tilde=np.zeros(grid.shape), u_tilde=np.zeros((2,) + grid.shape))
    with pytest.raises(MapDegenerateError):
        total_mass(fluid, replace(flowmap, detJ=detJ), grid, 1.0)


def test_mean_density_of_constant(grid):
    assert mean_density(np.full(grid.shape, 1.3), grid) == 1.3


def test_mean_density_with_bump(grid):
    eps = 1e-2
    rho0 = 1.0 + eps * density_bump(grid)
    expected = 1.0 + eps * bump_mass(grid.R) / (8.0 * np.pi)
    assert mean_density(rho0, grid) == pytest.approx(expected, abs=1e-5)


def test_mean_density_zero_mean_bump(grid):
    bump = density_bump(grid)
    zero_mean = bump - grid.integrate(bump) / grid.area
    assert abs(mean_density(1.0 + zero_mean, grid) - 1.0) < 1e-12


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
def test_mean_density_rejects_non_positive_reference(grid, bad):
    rho0 = np.ones(grid.shape)
    rho0[5, 7] = bad
    with pytest.raises(DomainError):
        mean_density(rho0, grid)
