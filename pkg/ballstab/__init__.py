"""ballstab - rigid ball stabilised by PD feedback in a compressible viscous fluid.

Architecture:
- core/: RunConfig and sections, logger, exceptions
- models/: Enums, pydantic report schemas, state dataclasses
- engine/: grid operators, kinematics, forcing, linear cascade, marcher,
  diagnostics, convergence studies, 1D piston oracle
- storage/: TrajectoryStore (CSV, BIG1 snapshots, summaries)
- cli.py: command-line entry point
"""

from .core import RunConfig, get_config, load_config
from .engine import LagrangianMarcher, PistonOracle, make_initial
from .models import ScenarioKind, Trajectory
from .storage import TrajectoryStore

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "get_config",
    "load_config",
    "LagrangianMarcher",
    "PistonOracle",
    "make_initial",
    "ScenarioKind",
    "Trajectory",
    "TrajectoryStore",
]
