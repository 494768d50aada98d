"""Configuration module for ballstab.

Typed sections are frozen pydantic models. A run configuration is read from
a flat INI file (one section per model) and then checked against every
modelling hypothesis; all violations are collected before anything is
reported.
"""
import configparser
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..models.enums import BoundaryTreatment, RampProfile, ScenarioKind, TimeScheme
from ..models.schemas import Violation
from .exceptions import ConfigValidationError
from .logger import get_logger

logger = get_logger("config")

MIN_N_R = 17
MIN_N_THETA = 32


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")


class PhysicalParams(_Section):
    """Fluid constants and body density."""

    a: float = Field(1.0, description="Pressure coefficient in p = a rho^gamma")
    gamma: float = Field(2.0, description="Adiabatic exponent")
    mu: float = Field(1.0, description="Shear viscosity")
    lam: float = Field(0.0, alias="lambda", description="Bulk-related viscosity")
    rho_bar: float = Field(1.0, description="Reference mean density")
    rho_body: float = Field(1.0, description="Body density")
    dim: int = Field(2, description="Spatial dimension (runtime uses 2)")

    @property
    def p_star(self) -> float:
        """Linearised sound-speed factor a*gamma*rho_bar^(gamma-2)."""
        return self.a * self.gamma * self.rho_bar ** (self.gamma - 2.0)


class Geometry(_Section):
    """Container disk centred at the origin, unit body radius."""

    container_radius: float = Field(3.0, description="Container radius R")
    h0: tuple[float, float] = Field((0.0, 0.0), description="Initial body centre")
    h1: tuple[float, float] = Field((0.05, 0.0), description="Target body centre")

    @property
    def center(self) -> tuple[float, float]:
        return (0.0, 0.0)

    @property
    def body_radius(self) -> float:
        return 1.0


class GridConfig(_Section):
    n_r: int = Field(33, description="Radial node count, r_0 = 1 .. r_{n_r-1} = R")
    n_theta: int = Field(64, description="Angular node count (periodic)")


class ControllerParams(_Section):
    """PD feedback constants."""

    k_d: float = Field(4.0, description="Damper gain")
    T_I: float = Field(1.0, description="Ramp end time")
    ramp: RampProfile = Field(RampProfile.SMOOTHSTEP, description="k_p ramp profile")


class MarchConfig(_Section):
    dt: float = 1e-3
    T_final: float = 30.0
    picard_tol: float = Field(1e-10, description="Relative successive-iterate tolerance")
    picard_max: int = 50
    eta: float = Field(0.1, description="Geometry margin: R - |h - c| > 1 + eta")
    map_distortion_max: float = Field(0.2, description="Abort threshold on max |grad X - I|")
    time_scheme: TimeScheme = TimeScheme.IMPLICIT_EULER
    boundary: BoundaryTreatment = BoundaryTreatment.STRONG
    compat_tol: float = Field(1e-3, description="Max allowed initial compatibility residual")


class ScenarioConfig(_Section):
    kind: ScenarioKind = ScenarioKind.DISPLACED_REST
    epsilon: float = Field(1e-2, description="density-bump amplitude")
    omega0: float = Field(0.01, description="rigid-spin angular velocity")


class OutputConfig(_Section):
    output_dir: str = "runs/default"
    snapshot_every: int = Field(100, description="Snapshot cadence in steps (0 disables)")


class PistonConfig(_Section):
    """1D gas column with an interior piston."""

    length: float = 2.0
    h0: float = 0.9
    h1: float = 1.0
    n_cells: int = Field(64, description="Cells per column")
    dt: float = 1e-3
    T_final: float = 20.0


class ConvergenceConfig(_Section):
    n_r_list: tuple[int, ...] = (17, 33, 65)
    n_theta_list: tuple[int, ...] = (32, 64, 128)
    dt_list: tuple[float, ...] = (4e-2, 2e-2, 1e-2)
    spatial_order_min: float = 1.9
    temporal_order_min: float = 0.9


class RunConfig(_Section):
    physical: PhysicalParams = PhysicalParams()
    geometry: Geometry = Geometry()
    controller: ControllerParams = ControllerParams()
    grid: GridConfig = GridConfig()
    march: MarchConfig = MarchConfig()
    scenario: ScenarioConfig = ScenarioConfig()
    output: OutputConfig = OutputConfig()
    piston: PistonConfig = PistonConfig()
    convergence: ConvergenceConfig = ConvergenceConfig()


SECTIONS: dict[str, type[_Section]] = {
    "physical": PhysicalParams,
    "geometry": Geometry,
    "controller": ControllerParams,
    "grid": GridConfig,
    "march": MarchConfig,
    "scenario": ScenarioConfig,
    "output": OutputConfig,
    "piston": PistonConfig,
    "convergence": ConvergenceConfig,
}

_TUPLE_FIELDS = {
    ("geometry", "h0"),
    ("geometry", "h1"),
    ("convergence", "n_r_list"),
    ("convergence", "n_theta_list"),
    ("convergence", "dt_list"),
}


# ===== Loading =====

def load_config(path: str | Path) -> RunConfig:
    """Parse and validate an INI run configuration.

    Args:
        path: INI file with sections physical, geometry, controller, grid,
            march, scenario, output, piston, convergence. Keys may also be
            written dotted (``controller.k_d = 4``) in any section.

    Returns:
        Fully validated RunConfig

    Raises:
        ConfigValidationError: with every type error, unknown key and
            failed hypothesis found
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigValidationError(
            [Violation(field="<file>", hypothesis="file", message=f"config file not found: {path}")]
        )

    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    parser.read(path, encoding="utf-8")

    raw: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
    violations: list[Violation] = []
    for section in parser.sections():
        for key, value in parser.items(section):
            target, name = _route_key(section, key)
            if target not in SECTIONS:
                violations.append(
                    Violation(
                        field=f"{target}.{name}",
                        hypothesis="unknown-key",
                        message=f"unknown section '{target}'",
                    )
                )
                continue
            raw[target][name] = _coerce(target, name, value)

    config, type_violations = build_config(raw)
    violations.extend(type_violations)
    if config is not None:
        violations.extend(check_hypotheses(config))
    if violations or config is None:
        raise ConfigValidationError(violations)

    logger.info(f"Loaded config {path} (scenario={config.scenario.kind.value})")
    return config


def build_config(raw: dict[str, dict[str, Any]]) -> tuple[RunConfig | None, list[Violation]]:
    """Build a RunConfig from per-section dicts, collecting type errors."""
    sections: dict[str, Any] = {}
    violations: list[Violation] = []
    for name, model in SECTIONS.items():
        try:
            sections[name] = model(**raw.get(name, {}))
        except ValidationError as exc:
            for err in exc.errors():
                loc = ".".join(str(p) for p in err["loc"]) or "<section>"
                hypothesis = "unknown-key" if err["type"] == "extra_forbidden" else "type"
                violations.append(
                    Violation(
                        field=f"{name}.{loc}",
                        hypothesis=hypothesis,
                        message=err["msg"],
                        offending={"input": str(err.get("input"))},
                    )
                )
    if violations:
        return None, violations
    return RunConfig(**sections), []


def _route_key(section: str, key: str) -> tuple[str, str]:
    if "." in key:
        target, name = key.split(".", 1)
        return target.strip(), name.strip()
    return section, key


def _coerce(section: str, key: str, value: str) -> Any:
    value = value.strip().strip("'\"")
    if (section, key) in _TUPLE_FIELDS:
        parts = [p.strip() for p in value.strip("()[]").split(",") if p.strip()]
        return tuple(parts)
    return value


# ===== Hypotheses =====

def check_hypotheses(config: RunConfig) -> list[Violation]:
    """Run every hypothesis check and return all violations (empty when valid)."""
    from ..engine.controller import validate_controller

    violations: list[Violation] = []
    violations.extend(check_physical(config.physical))
    violations.extend(check_geometry(config.geometry, config.march.eta))
    violations.extend(check_grid(config.grid))
    violations.extend(validate_controller(config.controller))
    violations.extend(check_march(config.march))
    violations.extend(check_scenario(config.scenario))
    violations.extend(check_piston(config.piston))
    return violations


def check_physical(p: PhysicalParams) -> list[Violation]:
    out: list[Violation] = []
    if not p.gamma > 1.5:
        out.append(_v("physical.gamma", "adiabatic-exponent", "gamma must exceed 3/2", gamma=p.gamma))
    if not p.mu > 0:
        out.append(_v("physical.mu", "shear-viscosity", "mu must be positive", mu=p.mu))
    if not p.lam + p.mu >= 0:
        out.append(
            _v(
                "physical.lambda",
                "viscosity-ellipticity",
                "lambda + mu must be non-negative",
                **{"lambda": p.lam, "mu": p.mu},
            )
        )
    if not p.a > 0:
        out.append(_v("physical.a", "pressure-coefficient", "a must be positive", a=p.a))
    if not p.rho_bar > 0:
        out.append(_v("physical.rho_bar", "reference-density", "rho_bar must be positive", rho_bar=p.rho_bar))
    if not p.rho_body > 0:
        out.append(_v("physical.rho_body", "body-density", "rho_body must be positive", rho_body=p.rho_body))
    if p.dim != 2:
        out.append(
            _v("physical.dim", "runtime-dimension", "the runtime discretisation is two-dimensional", dim=p.dim)
        )
    return out


def check_geometry(g: Geometry, eta: float) -> list[Violation]:
    out: list[Violation] = []
    R = g.container_radius
    if not R > 2:
        out.append(_v("geometry.container_radius", "container-radius", "container radius must exceed 2", R=R))
    if tuple(g.h0) != g.center:
        out.append(
            _v("geometry.h0", "initial-center", "h0 must be the container centre", h0=list(g.h0))
        )
    margin = R - math.hypot(*g.h1)
    if not margin > 1 + eta:
        out.append(
            _v(
                "geometry.h1",
                "target-margin",
                "target must satisfy R - |h1 - c| > 1 + eta",
                h1=list(g.h1),
                margin=margin,
                eta=eta,
            )
        )
    return out


def check_grid(g: GridConfig) -> list[Violation]:
    out: list[Violation] = []
    if g.n_r < MIN_N_R:
        out.append(_v("grid.n_r", "grid-minimum", f"n_r must be at least {MIN_N_R}", n_r=g.n_r))
    if g.n_theta < MIN_N_THETA:
        out.append(
            _v("grid.n_theta", "grid-minimum", f"n_theta must be at least {MIN_N_THETA}", n_theta=g.n_theta)
        )
    return out


def check_march(m: MarchConfig) -> list[Violation]:
    out: list[Violation] = []
    positive = {
        "dt": m.dt,
        "picard_tol": m.picard_tol,
        "eta": m.eta,
        "map_distortion_max": m.map_distortion_max,
        "compat_tol": m.compat_tol,
    }
    for key, value in positive.items():
        if not value > 0:
            out.append(_v(f"march.{key}", "march-positive", f"{key} must be positive", **{key: value}))
    if not m.T_final >= 0:
        out.append(_v("march.T_final", "march-positive", "T_final must be non-negative", T_final=m.T_final))
    if m.picard_max < 2:
        out.append(_v("march.picard_max", "picard-max", "picard_max must be at least 2", picard_max=m.picard_max))
    return out


def check_scenario(s: ScenarioConfig) -> list[Violation]:
    out: list[Violation] = []
    if s.kind is ScenarioKind.DENSITY_BUMP and not s.epsilon > -1:
        out.append(
            _v("scenario.epsilon", "initial-positivity", "epsilon must exceed -1", epsilon=s.epsilon)
        )
    if not (math.isfinite(s.epsilon) and math.isfinite(s.omega0)):
        out.append(_v("scenario", "finite", "scenario amplitudes must be finite"))
    return out


def check_piston(p: PistonConfig) -> list[Violation]:
    out: list[Violation] = []
    if not p.length > 0:
        out.append(_v("piston.length", "piston-geometry", "length must be positive", length=p.length))
    for key in ("h0", "h1"):
        value = getattr(p, key)
        if not 0 < value < p.length:
            out.append(
                _v(f"piston.{key}", "piston-geometry", f"{key} must lie inside (0, length)", **{key: value})
            )
    if p.n_cells < 4:
        out.append(_v("piston.n_cells", "grid-minimum", "n_cells must be at least 4", n_cells=p.n_cells))
    if not p.dt > 0:
        out.append(_v("piston.dt", "march-positive", "dt must be positive", dt=p.dt))
    return out


def _v(field: str, hypothesis: str, message: str, **values: Any) -> Violation:
    return Violation.of(field, hypothesis, message, **values)


# ===== Runtime settings (environment) =====

@dataclass
class RuntimeSettings:
    """Process-level settings read from the environment."""

    threads: int = 1
    log_level: str = "INFO"
    config_path: str | None = None

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        """Create settings from environment variables (after .env is loaded)."""
        load_dotenv()
        threads = int(os.getenv("BIG_THREADS", "1"))
        return cls(
            threads=max(1, threads),
            log_level=os.getenv("BIG_LOG_LEVEL", "INFO"),
            config_path=os.getenv("BIG_CONFIG") or None,
        )


@lru_cache
def get_runtime_settings() -> RuntimeSettings:
    """Get cached runtime settings."""
    return RuntimeSettings.from_env()


def reload_runtime_settings() -> RuntimeSettings:
    """Drop the cache and re-read the environment."""
    get_runtime_settings.cache_clear()
    return get_runtime_settings()


# Singleton config
_config: RunConfig | None = None


def get_config() -> RunConfig:
    """Get or create the run configuration named by BIG_CONFIG (defaults otherwise)."""
    global _config

    if _config is None:
        _config = _load_config_from_env()

    return _config


def reload_config() -> RunConfig:
    """Reload configuration from environment"""
    global _config
    _config = _load_config_from_env()
    return _config


def _load_config_from_env() -> RunConfig:
    path = reload_runtime_settings().config_path
    if path:
        return load_config(path)
    return RunConfig()
