"""Models - enums, report schemas and state containers."""

from .enums import BoundaryTreatment, RampProfile, ScenarioKind, TimeScheme
from .schemas import (
    BindingConstraint,
    CompatReport,
    GuardReport,
    OrderRow,
    RunSummary,
    Violation,
)
from .state import (
    BodyState,
    EnergyReport,
    FlowMapState,
    FluidState,
    SimulationState,
    Trajectory,
    TrajectoryRecord,
)

__all__ = [
    # Enums
    "BoundaryTreatment",
    "RampProfile",
    "ScenarioKind",
    "TimeScheme",
    # Schemas
    "BindingConstraint",
    "CompatReport",
    "GuardReport",
    "OrderRow",
    "RunSummary",
    "Violation",
    # State
    "BodyState",
    "EnergyReport",
    "FlowMapState",
    "FluidState",
    "SimulationState",
    "Trajectory",
    "TrajectoryRecord",
]
