from dataclasses import replace

import numpy as np
import pytest

from ballstab.core.config import GridConfig, OutputConfig
from ballstab.core.exceptions import InsufficientSnapshotsError
from ballstab.engine import diagnostics
from ballstab.engine.diagnostics import (
    balance_residual,
    balance_series,
    discrete_norms,
    energy,
    energy_rate_terms,
)
from ballstab.engine.initial_data import make_initial
from ballstab.engine.marcher import LagrangianMarcher

from conftest import rest_state

M, J = np.pi, np.pi / 2.0


def test_spring_energy_of_displaced_rest(grid, params, controller):
    report = energy(rest_state(grid, h_tilde=(0.05, 0.0), t=1.0), params, controller, grid, M, J)
    assert report.E_spring == pytest.approx(0.00125, rel=1e-14)
    assert report.E_total == pytest.approx(0.00125, rel=1e-14)
    assert report.E_kin == 0.0
    assert report.E_compress == 0.0
    assert report.E_body == 0.0
    assert report.D_total == 0.0
    assert report.mass == pytest.approx(8.0 * np.pi, rel=1e-13)


def test_spring_energy_vanishes_at_start(grid, params, controller):
    report = energy(rest_state(grid, h_tilde=(0.05, 0.0), t=0.0), params, controller, grid, M, J)
    assert report.E_spring == 0.0


def test_compressive_energy_of_uniform_perturbation(grid, params, controller):
    eps = 0.1
    report = energy(rest_state(grid, rho_tilde=eps), params, controller, grid, M, J)
    # p* = a gamma rho_bar^(gamma - 2) = 2, so E = (p*/2) eps^2 |F(0)|
    assert report.E_compress == pytest.approx(eps**2 * 8.0 * np.pi, rel=1e-13)


def test_body_energy_and_damping(grid, params, controller):
    state = rest_state(grid)
    body = type(state.body)(h_tilde=np.zeros(2), ell_tilde=np.array([0.1, 0.0]), omega_tilde=0.2)
    state = type(state)(fluid=state.fluid, body=body, flowmap=state.flowmap, rho0=state.rho0)
    report = energy(state, params, controller, grid, M, J)
    assert report.E_body == pytest.approx(0.5 * M * 0.01 + 0.5 * J * 0.04)
    assert report.D_damp == pytest.approx(4.0 * 0.01)


def test_norms_of_constant_field(grid):
    c = 1.7
    norms = discrete_norms(np.full(grid.shape, c), grid)
    expected = c * np.sqrt(8.0 * np.pi)
    for key in ("L2", "H1", "H2"):
        assert norms[key] == pytest.approx(expected, rel=1e-10)


def test_norms_are_ordered(grid):
    x, y = grid.y
    norms = discrete_norms(np.sin(x) * np.cos(y), grid)
    assert norms["L2"] < norms["H1"] < norms["H2"]
    vector = discrete_norms(np.stack([np.sin(x), np.cos(y)]), grid)
    assert vector["L2"] < vector["H1"]


def test_balance_needs_three_snapshots(grid, params, controller):
    window = [rest_state(grid, t=0.0), rest_state(grid, t=1e-3)]
    with pytest.raises(InsufficientSnapshotsError):
        balance_residual(window, params, controller, grid, M, J)


def test_balance_vanishes_at_equilibrium(grid, params, controller):
    window = [rest_state(grid, t=k * 1e-3) for k in range(4)]
    residuals = balance_residual(window, params, controller, grid, M, J)
    assert residuals.shape == (2,)
    assert np.all(residuals == 0.0)


def test_balance_after_the_ramp(grid, params, controller):
    window = [rest_state(grid, h_tilde=(0.05, 0.0), t=2.0 + k * 1e-3) for k in range(3)]
    assert balance_residual(window, params, controller, grid, M, J)[0] == pytest.approx(0.0, abs=1e-12)


def test_balance_accounts_for_ramp_power(grid, params, controller):
    # k_p' |h - h1|^2 / 2 is the only energy source of a frozen displaced body
    window = [rest_state(grid, h_tilde=(0.05, 0.0), t=0.5 + k * 1e-3) for k in (-1, 0, 1)]
    terms = energy_rate_terms(window[1], params, controller, grid, M, J)
    assert terms.ramp == pytest.approx(0.5 * 1.5 * 0.0025, rel=1e-12)
    assert terms.cubic == 0.0
    assert terms.transport == 0.0
    assert terms.cross == 0.0
    assert balance_residual(window, params, controller, grid, M, J)[0] < 1e-5


def _swirl_window(grid, amplitude=1e-3, t=2.0, dt=1e-3):
    """Frozen azimuthal flow vanishing on both walls, three levels after the ramp."""
    x, y = grid.y
    r = np.hypot(x, y)
    speed = amplitude * (r - 1.0) ** 2 * (grid.R - r) ** 2
    u = np.stack([-speed * y / r, speed * x / r])
    window = []
    for k in (-1, 0, 1):
        state = rest_state(grid, t=t + k * dt)
        fluid = type(state.fluid)(rho_tilde=state.fluid.rho_tilde, u_tilde=u, t=state.t)
        window.append(
            type(state)(fluid=fluid, body=state.body, flowmap=state.flowmap, rho0=state.rho0)
        )
    return window


def test_frozen_swirl_residual_equals_dissipation(grid, params, controller):
    # E does not change, advection is orthogonal to u and there is no density
    # mismatch, so the identity leaves r = D
    window = _swirl_window(grid)
    report = energy(window[1], params, controller, grid, M, J)
    assert report.D_visc_shear > 0.0
    (row,) = balance_series(window, params, controller, grid, M, J)
    assert row.dE == 0.0
    assert row.terms.transport == 0.0
    assert row.terms.cubic == 0.0
    assert row.residual == pytest.approx(report.D_total, rel=1e-6)


def test_inflated_dissipation_moves_the_residual(grid, params, controller, mocker):
    window = _swirl_window(grid)
    (clean,) = balance_series(window, params, controller, grid, M, J)
    shear = energy(window[1], params, controller, grid, M, J).D_visc_shear

    original = diagnostics.energy

    def inflated_energy(*args, **kwargs):
        report = original(*args, **kwargs)
        return replace(report, D_visc_shear=1000.0 * report.D_visc_shear)

    mocker.patch.object(diagnostics, "energy", side_effect=inflated_energy)
    (inflated,) = balance_series(window, params, controller, grid, M, J)
    assert inflated.residual == pytest.approx(clean.residual + 999.0 * shear, rel=1e-10)
    assert abs(inflated.residual) > 100.0 * abs(clean.residual)


@pytest.mark.slow
def test_balance_residuals_of_a_run(small_config):
    config = small_config.model_copy(
        update={"march": small_config.march.model_copy(update={"T_final": 0.005})}
    )
    marcher = LagrangianMarcher(config, threads=1)
    initial = make_initial(config.scenario.kind, config.physical, config.geometry, marcher.grid)
    state = marcher.prepare(initial)
    window = [state]
    rhs = marcher.forcing(state)
    for _ in range(4):
        state, rhs, _ = marcher.picard_step(state, rhs)
        window.append(state)
    residuals = balance_residual(
        window, marcher.params, config.controller, marcher.grid, marcher.m, marcher.J
    )
    assert residuals.shape == (3,)
    assert np.all(np.isfinite(residuals))


@pytest.mark.slow
@pytest.mark.timeout(3600)
def test_balance_residual_is_first_order_in_dt(small_config):
    # same physical times, reference grid; only the step changes
    worst = []
    for dt in (0.02, 0.01):
        config = small_config.model_copy(
            update={
                "grid": GridConfig(n_r=33, n_theta=64),
                "march": small_config.march.model_copy(update={"dt": dt, "T_final": 1.6}),
                "output": OutputConfig(snapshot_every=1),
            }
        )
        marcher = LagrangianMarcher(config, threads=1)
        initial = make_initial(config.scenario.kind, config.physical, config.geometry, marcher.grid)
        snapshots = marcher.run(initial, keep_snapshots=True).snapshots
        residuals = []
        for t_c in (0.4, 0.8, 1.2):
            n = round(t_c / dt)
            window = [snapshots[k] for k in (n - 1, n, n + 1)]
            (row,) = balance_series(
                window, marcher.params, config.controller, marcher.grid, marcher.m, marcher.J
            )
            assert row.t == pytest.approx(t_c)
            residuals.append(abs(row.residual))
        worst.append(max(residuals))
    assert worst[1] > 0.0
    assert worst[0] >= 1.8 * worst[1]
