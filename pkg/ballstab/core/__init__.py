"""Core module - configuration, logging and exceptions"""

from .config import (
    ControllerParams,
    Geometry,
    GridConfig,
    MarchConfig,
    PhysicalParams,
    PistonConfig,
    RunConfig,
    RuntimeSettings,
    get_config,
    get_runtime_settings,
    load_config,
    reload_config,
)
from .exceptions import (
    BallStabException,
    ConfigValidationError,
    DomainError,
    GuardViolation,
    NumericalFailure,
)
from .logger import get_logger, set_quiet

__all__ = [
    # Config
    "ControllerParams",
    "Geometry",
    "GridConfig",
    "MarchConfig",
    "PhysicalParams",
    "PistonConfig",
    "RunConfig",
    "RuntimeSettings",
    "get_config",
    "get_runtime_settings",
    "load_config",
    "reload_config",
    # Exceptions
    "BallStabException",
    "ConfigValidationError",
    "DomainError",
    "GuardViolation",
    "NumericalFailure",
    # Logging
    "get_logger",
    "set_quiet",
]
