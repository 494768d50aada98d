import pytest

from ballstab.core.config import (
    ControllerParams,
    RunConfig,
    check_hypotheses,
    get_runtime_settings,
    load_config,
    reload_config,
    reload_runtime_settings,
)
from ballstab.core.exceptions import ConfigValidationError
from ballstab.models.enums import RampProfile, ScenarioKind

from conftest import write_cfg


def _hypotheses(exc: ConfigValidationError) -> set[str]:
    return {v.hypothesis for v in exc.violations}


def test_shipped_configs_pass(config_dir):
    for name in ("default.cfg", "rigid-spin.cfg", "huge-displacement.cfg"):
        config = load_config(config_dir / name)
        assert isinstance(config, RunConfig)


def test_default_config_values(config_dir):
    config = load_config(config_dir / "default.cfg")
    assert config.physical.gamma == 2.0
    assert config.physical.mu == 0.05
    assert config.physical.lam == 2.0
    assert config.march.map_distortion_max == 0.5
    assert config.geometry.h1 == (0.05, 0.0)
    assert config.controller.ramp is RampProfile.SMOOTHSTEP
    assert config.scenario.kind is ScenarioKind.DISPLACED_REST
    assert config.convergence.n_r_list == (17, 33, 65)


def test_gamma_below_three_halves_rejected(tmp_path):
    path = write_cfg(tmp_path / "bad.cfg", "[physical]\ngamma = 1.4\n")
    with pytest.raises(ConfigValidationError) as info:
        load_config(path)
    messages = [v.message for v in info.value.violations]
    assert "gamma must exceed 3/2" in messages
    assert _hypotheses(info.value) == {"adiabatic-exponent"}
    (violation,) = info.value.violations
    assert violation.tag == "(constitutive law)"
    assert violation.cited == "(constitutive law): gamma must exceed 3/2"


def test_ramp_slope_boundary_case_rejected(tmp_path):
    path = write_cfg(tmp_path / "bad.cfg", "[controller]\nk_d = 3\nT_I = 1\n")
    with pytest.raises(ConfigValidationError) as info:
        load_config(path)
    (violation,) = info.value.violations
    assert violation.hypothesis == "ramp-slope"
    assert violation.cited.startswith("(hypkp): sup k_p' = 1.5 must be strictly below")
    assert "(hypkp)" in str(info.value)
    assert violation.offending["sup_kp_slope"] == pytest.approx(1.5)
    assert violation.offending["bound"] == pytest.approx(1.5)


def test_zero_shear_viscosity_rejected(tmp_path):
    path = write_cfg(tmp_path / "bad.cfg", "[physical]\nmu = 0\n")
    with pytest.raises(ConfigValidationError) as info:
        load_config(path)
    assert "shear-viscosity" in _hypotheses(info.value)


def test_lambda_minus_two_mu_rejected(tmp_path):
    path = write_cfg(tmp_path / "bad.cfg", "[physical]\nmu = 1\nlambda = -2\n")
    with pytest.raises(ConfigValidationError) as info:
        load_config(path)
    assert _hypotheses(info.value) == {"viscosity-ellipticity"}


def test_all_violations_are_collected(tmp_path):
    text = "[physical]\ngamma = 1.4\nmu = 0\n\n[controller]\nk_d = 3\n\n[grid]\nn_r = 9\n"
    path = write_cfg(tmp_path / "bad.cfg", text)
    with pytest.raises(ConfigValidationError) as info:
        load_config(path)
    assert {"adiabatic-exponent", "shear-viscosity", "ramp-slope", "grid-minimum"} <= _hypotheses(
        info.value
    )
    tags = {v.hypothesis: v.tag for v in info.value.violations}
    assert tags["shear-viscosity"] == "(viscosity hypotheses)"
    assert tags["ramp-slope"] == "(hypkp)"
    assert tags["grid-minimum"] is None


def test_unknown_key_and_type_errors(tmp_path):
    path = write_cfg(tmp_path / "bad.cfg", "[march]\ndt = fast\ncolour = red\n")
    with pytest.raises(ConfigValidationError) as info:
        load_config(path)
    assert _hypotheses(info.value) == {"type", "unknown-key"}


def test_dotted_keys_route_to_their_section(tmp_path):
    path = write_cfg(tmp_path / "dotted.cfg", "[overrides]\ncontroller.k_d = 8\nmarch.dt = 5e-4\n")
    config = load_config(path)
    assert config.controller.k_d == 8.0
    assert config.march.dt == 5e-4


def test_target_margin_and_initial_center(tmp_path):
    path = write_cfg(tmp_path / "bad.cfg", "[geometry]\nh0 = 0.1, 0.0\nh1 = 1.95, 0.0\n")
    with pytest.raises(ConfigValidationError) as info:
        load_config(path)
    assert _hypotheses(info.value) == {"initial-center", "target-margin"}


def test_missing_file(tmp_path):
    with pytest.raises(ConfigValidationError) as info:
        load_config(tmp_path / "absent.cfg")
    assert info.value.violations[0].hypothesis == "file"


def test_check_hypotheses_default_is_clean():
    assert check_hypotheses(RunConfig()) == []


def test_off_ramp_never_validates():
    config = RunConfig(controller=ControllerParams(ramp=RampProfile.OFF))
    assert "ramp-end" in {v.hypothesis for v in check_hypotheses(config)}


def test_runtime_settings_from_env(monkeypatch):
    monkeypatch.setenv("BIG_THREADS", "4")
    monkeypatch.setenv("BIG_LOG_LEVEL", "DEBUG")
    settings = reload_runtime_settings()
    assert settings.threads == 4
    assert settings.log_level == "DEBUG"
    assert get_runtime_settings() is settings

    monkeypatch.setenv("BIG_THREADS", "0")
    assert reload_runtime_settings().threads == 1


def test_reload_config_reads_big_config(monkeypatch, config_dir):
    monkeypatch.setenv("BIG_CONFIG", str(config_dir / "rigid-spin.cfg"))
    config = reload_config()
    assert config.scenario.kind is ScenarioKind.RIGID_SPIN

    monkeypatch.delenv("BIG_CONFIG")
    assert reload_config() == RunConfig()
    reload_runtime_settings()
