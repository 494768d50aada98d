import numpy as np
import pytest

from ballstab.core.config import Geometry, ScenarioConfig
from ballstab.core.exceptions import DomainError
from ballstab.engine.initial_data import (
    InitialData,
    bump_profile,
    compat_residuals,
    cyclostrophic_density,
    density_bump,
    initial_state,
    make_initial,
)
from ballstab.models.enums import ScenarioKind


@pytest.fixture
def geometry() -> Geometry:
    return Geometry()


def test_bump_profile():
    assert bump_profile(0.5) == 1.0
    assert bump_profile(0.0) == 0.0
    assert bump_profile(1.0) == 0.0
    assert np.all(bump_profile(np.array([-0.5, 1.5])) == 0.0)


def test_density_bump_support(grid):
    phi = density_bump(grid)
    assert np.all(phi >= 0.0)
    assert np.max(phi) <= 1.0
    # nothing within two nodes of either boundary
    assert np.all(phi[:3] == 0.0)
    assert np.all(phi[-3:] == 0.0)


def test_displaced_rest_is_compatible(grid, params, geometry):
    initial = make_initial(ScenarioKind.DISPLACED_REST, params, geometry, grid)
    assert np.all(initial.rho0 == params.rho_bar)
    assert initial.rho_bar == params.rho_bar
    report = compat_residuals(initial, params, geometry, grid)
    assert report.max_residual <= 1e-12


def test_density_bump_without_amplitude_is_uniform(grid, params, geometry):
    flat = make_initial(
        ScenarioKind.DENSITY_BUMP, params, geometry, grid, ScenarioConfig(epsilon=0.0)
    )
    rest = make_initial(ScenarioKind.DISPLACED_REST, params, geometry, grid)
    assert np.array_equal(flat.rho0, rest.rho0)


def test_density_bump_is_compatible(grid, params, geometry):
    initial = make_initial(
        "density-bump", params, geometry, grid, ScenarioConfig(kind="density-bump", epsilon=1e-2)
    )
    assert initial.rho_bar > params.rho_bar
    assert np.all(initial.u0 == 0.0)
    report = compat_residuals(initial, params, geometry, grid)
    assert report.max_residual <= 1e-8


def test_trace_violation_is_reported(grid, params, geometry):
    u0 = np.zeros((2,) + grid.shape)
    u0[0, -1, :] = 0.3
    initial = InitialData(
        kind=ScenarioKind.DISPLACED_REST,
        rho0=np.ones(grid.shape),
        u0=u0,
        ell0=np.zeros(2),
        omega0=0.0,
        h0=np.zeros(2),
        rho_bar=1.0,
    )
    report = compat_residuals(initial, params, geometry, grid)
    assert report.trace == pytest.approx(0.3)
    assert report.max_residual >= 0.3


def test_rigid_spin_is_nearly_compatible(grid, params, geometry):
    initial = make_initial(
        ScenarioKind.RIGID_SPIN, params, geometry, grid, ScenarioConfig(kind="rigid-spin", omega0=0.01)
    )
    assert initial.omega0 == 0.01
    report = compat_residuals(initial, params, geometry, grid)
    assert report.trace <= 1e-15
    # the angular truncation of the spin field sets the floor here
    assert report.body_balance < 1e-4
    assert report.wall_balance < 1e-4


def test_cyclostrophic_density_is_radial(grid, params):
    rho = cyclostrophic_density(grid, params, 0.05)
    assert np.all(rho == rho[:, :1])
    assert rho[-1, 0] == pytest.approx(params.rho_bar, rel=1e-13)
    assert np.all(np.diff(rho[:, 0]) >= 0.0)
    assert rho[0, 0] < params.rho_bar


def test_cyclostrophic_density_rejects_fast_spin(grid, params):
    with pytest.raises(DomainError):
        cyclostrophic_density(grid, params, 100.0)


def test_unknown_kind_rejected(grid, params, geometry):
    with pytest.raises(DomainError):
        make_initial("vortex-street", params, geometry, grid)


def test_initial_state_layout(grid, params, geometry):
    initial = make_initial(ScenarioKind.DISPLACED_REST, params, geometry, grid)
    state = initial_state(initial, geometry, grid)
    expected_h = np.asarray(geometry.h0, dtype=float) - np.asarray(geometry.h1, dtype=float)
    assert np.array_equal(state.body.h_tilde, expected_h)
    assert state.body.theta_q == 0.0
    assert state.t == 0.0
    assert np.all(state.fluid.rho_tilde == 0.0)
    assert np.array_equal(state.flowmap.X, grid.y)
    assert np.array_equal(state.rho0, initial.rho0)
