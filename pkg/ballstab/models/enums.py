"""Enums - scenario kinds, ramp profiles and solver switches."""

from enum import Enum


class RampProfile(str, Enum):
    """Shape of the proportional gain ramp k_p(t)."""

    SMOOTHSTEP = "smoothstep"  # s^2(3-2s), sup slope 3/(2 T_I)
    LINEAR_CAPPED = "linear-capped"  # linear middle, quadratic caps, sup slope 4/(3 T_I)
    OFF = "off"  # k_p = 0; only for oracle runs, never passes validation


class ScenarioKind(str, Enum):
    """Initial-data generators."""

    DISPLACED_REST = "displaced-rest"
    DENSITY_BUMP = "density-bump"
    RIGID_SPIN = "rigid-spin"


class TimeScheme(str, Enum):
    IMPLICIT_EULER = "implicit-euler"
    CRANK_NICOLSON = "crank-nicolson"


class BoundaryTreatment(str, Enum):
    """How the rigid Dirichlet data enters the Lame solve."""

    STRONG = "strong"
    LIFTING = "lifting"
