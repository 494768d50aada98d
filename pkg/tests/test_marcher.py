import numpy as np
import pytest

from ballstab.core.config import ControllerParams, MarchConfig, OutputConfig, load_config
from ballstab.core.exceptions import (
    ConfigValidationError,
    DistortionViolation,
    NumericalFailure,
    PicardNonConvergence,
)
from ballstab.engine.initial_data import make_initial
from ballstab.engine.marcher import LagrangianMarcher, PicardHistory, run


def _initial(config, marcher):
    return make_initial(
        config.scenario.kind, config.physical, config.geometry, marcher.grid, config.scenario
    )


def _march(config, **kwargs):
    return config.model_copy(update={"march": config.march.model_copy(update=kwargs)})


def test_picard_history_ratios():
    history = PicardHistory(differences=[1.0, 0.1, 0.02, 0.0, 0.0])
    assert history.iterations == 5
    assert history.ratios == pytest.approx([0.1, 0.2, 0.0, 0.0])
    assert history.max_ratio == pytest.approx(0.2)
    assert PicardHistory().max_ratio == 0.0


def test_zero_final_time_emits_initial_record(small_config):
    config = _march(small_config, T_final=0.0)
    marcher = LagrangianMarcher(config, threads=1)
    trajectory = marcher.run(_initial(config, marcher))
    assert len(trajectory) == 1
    assert trajectory.records[0].t == 0.0
    assert trajectory.records[0].energy.E_spring == 0.0


def test_equilibrium_stays_at_rest(equilibrium_config):
    marcher = LagrangianMarcher(equilibrium_config, threads=1)
    state = marcher.prepare(_initial(equilibrium_config, marcher))
    rhs = marcher.forcing(state)
    for _ in range(5):
        state, rhs, history = marcher.picard_step(state, rhs)
        assert history.iterations == 1
        assert np.max(np.abs(state.fluid.u_tilde)) <= 1e-12
        assert np.max(np.abs(state.fluid.rho_tilde)) <= 1e-12
    assert state.step == 5
    assert state.t == pytest.approx(5e-3)


def test_picard_step_requires_prepare(small_config):
    marcher = LagrangianMarcher(small_config, threads=1)
    with pytest.raises(NumericalFailure):
        marcher.picard_step(None, None)


def test_short_run_diagnostics(small_config):
    marcher = LagrangianMarcher(small_config, threads=1)
    trajectory = marcher.run(_initial(small_config, marcher))
    assert len(trajectory) == 11
    assert np.all(np.diff(trajectory.times) > 0)
    first, last = trajectory.records[0], trajectory.records[-1]
    assert first.energy.E_spring == 0.0
    assert abs(last.energy.mass - first.energy.mass) <= 1e-6 * first.energy.mass
    assert max(r.contraction_max for r in trajectory.records) <= 0.5
    assert all(1 <= r.picard_iters <= small_config.march.picard_max for r in trajectory.records[1:])
    # the body starts moving towards h1 once the spring switches on
    assert last.h[0] > small_config.geometry.h0[0]


def test_summary_fields(small_config):
    marcher = LagrangianMarcher(small_config, threads=1)
    marcher.run(_initial(small_config, marcher))
    summary = marcher.summary()
    assert summary.status == "completed"
    assert summary.steps == 10
    assert summary.t_final == pytest.approx(0.01)
    assert summary.h_error_initial == pytest.approx(0.05)
    assert summary.mass_drift <= 1e-6
    assert summary.ramp_slope_binding is True
    assert summary.compat is not None and summary.compat.max_residual <= 1e-12
    guards = {b.guard for b in summary.binding}
    assert {"positivity", "map-jacobian", "geometry", "distortion", "picard"} <= guards
    assert summary.guard_report is None


def test_run_is_deterministic(small_config):
    def rows(threads):
        marcher = LagrangianMarcher(small_config, threads=threads)
        return [r.to_row() for r in marcher.run(_initial(small_config, marcher)).records]

    serial = rows(1)
    assert rows(1) == serial
    assert rows(2) == serial


def test_writer_receives_records_and_snapshots(small_config, mocker):
    config = small_config.model_copy(update={"output": OutputConfig(snapshot_every=5)})
    writer = mocker.Mock()
    marcher = LagrangianMarcher(config, writer=writer, threads=1)
    trajectory = marcher.run(_initial(config, marcher), keep_snapshots=True)
    assert writer.write_record.call_count == 11
    assert writer.write_snapshot.call_count == 3
    assert sorted(trajectory.snapshots) == [0, 5, 10]
    steps = [call.args[0].step for call in writer.write_snapshot.call_args_list]
    assert steps == [0, 5, 10]


def test_distortion_guard_aborts_with_partial_trajectory(small_config):
    config = _march(small_config, map_distortion_max=1e-15)
    marcher = LagrangianMarcher(config, threads=1)
    with pytest.raises(DistortionViolation) as info:
        marcher.run(_initial(config, marcher))
    assert len(marcher.trajectory) == 1
    assert info.value.to_report().guard == "distortion"
    summary = marcher.summary(status="guard-abort", error=info.value)
    assert summary.guard_report is not None
    assert summary.steps == 0


def test_picard_non_convergence(small_config):
    config = _march(small_config, picard_tol=1e-300, picard_max=2)
    marcher = LagrangianMarcher(config, threads=1)
    with pytest.raises(PicardNonConvergence) as info:
        marcher.run(_initial(config, marcher))
    assert len(info.value.differences) == 2
    assert info.value.t == pytest.approx(1e-3)


def test_invalid_controller_rejected_before_marching(small_config):
    config = small_config.model_copy(update={"controller": ControllerParams(k_d=3.0)})
    marcher = LagrangianMarcher(config, threads=1)
    with pytest.raises(ConfigValidationError) as info:
        marcher.run(_initial(config, marcher))
    assert "ramp-slope" in {v.hypothesis for v in info.value.violations}
    assert len(marcher.trajectory) == 0


def test_module_level_run(equilibrium_config):
    marcher = LagrangianMarcher(equilibrium_config, threads=1)
    trajectory = run(_initial(equilibrium_config, marcher), equilibrium_config)
    assert len(trajectory) == 11
    assert all(r.energy.E_total <= 1e-20 for r in trajectory.records)


@pytest.mark.slow
def test_equilibrium_long_run(equilibrium_config):
    config = equilibrium_config.model_copy(
        update={
            "grid": equilibrium_config.grid.model_copy(update={"n_r": 33, "n_theta": 64}),
            "march": MarchConfig(dt=1e-3, T_final=1.0),
        }
    )
    marcher = LagrangianMarcher(config, threads=1)
    trajectory = marcher.run(_initial(config, marcher))
    assert len(trajectory) == 1001
    assert max(r.u_h2 for r in trajectory.records) <= 1e-12
    assert all(np.linalg.norm(r.h - marcher.h1) <= 1e-12 for r in trajectory.records)


@pytest.mark.slow
def test_contraction_improves_with_smaller_steps(small_config):
    peaks = []
    for dt in (4e-3, 2e-3, 1e-3):
        config = _march(small_config, dt=dt, T_final=0.04)
        marcher = LagrangianMarcher(config, threads=1)
        marcher.run(_initial(config, marcher))
        peaks.append(marcher.summary().max_contraction)
    assert peaks[0] >= peaks[1] >= peaks[2]


@pytest.mark.slow
@pytest.mark.timeout(3600)
def test_picard_iterates_do_not_grow_as_dt_halves(config_dir):
    base = load_config(config_dir / "default.cfg")
    counts = []
    for dt in (4e-3, 2e-3, 1e-3):
        config = base.model_copy(
            update={
                "march": base.march.model_copy(update={"dt": dt, "T_final": 0.4}),
                "output": OutputConfig(snapshot_every=0),
            }
        )
        marcher = LagrangianMarcher(config, threads=1)
        trajectory = marcher.run(_initial(config, marcher))
        assert trajectory.records[-1].t == pytest.approx(0.4)
        counts.append(trajectory.records[-1].picard_iters)
    assert counts[0] >= counts[1] >= counts[2] >= 1
