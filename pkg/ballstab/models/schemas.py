"""Schemas - pydantic records for validation and run reports."""

from typing import Any

from pydantic import BaseModel, Field


# Equation tag of each hypothesis code; codes absent here are numerical or
# artifact constraints with no counterpart in the model's assumptions.
HYPOTHESIS_TAGS: dict[str, str] = {
    "adiabatic-exponent": "(constitutive law)",
    "pressure-coefficient": "(constitutive law)",
    "shear-viscosity": "(viscosity hypotheses)",
    "viscosity-ellipticity": "(viscosity hypotheses)",
    "reference-density": "(mean value)",
    "body-density": "(body mass and inertia)",
    "container-radius": "(Omega^0 non-empty)",
    "target-margin": "(1451)",
    "initial-positivity": "(initial condition space:global)",
    "ramp-time": "(hypkp)",
    "damper-gain": "(hypkp)",
    "ramp-start": "(hypkp)",
    "ramp-end": "(hypkp)",
    "ramp-range": "(hypkp)",
    "ramp-monotone": "(hypkp)",
    "ramp-slope": "(hypkp)",
}


class Violation(BaseModel):
    """One failed configuration hypothesis."""

    field: str = Field(..., description="Dotted config key, e.g. 'controller.k_d'")
    hypothesis: str = Field(..., description="Stable hypothesis code, e.g. 'ramp-slope'")
    message: str = Field(..., description="Plain-language clause that failed")
    offending: dict[str, Any] = Field(default_factory=dict, description="Offending numeric values")
    tag: str | None = Field(None, description="Equation tag of the hypothesis, e.g. '(hypkp)'")

    @classmethod
    def of(cls, field: str, hypothesis: str, message: str, **values: Any) -> "Violation":
        """Build a violation tagged from HYPOTHESIS_TAGS."""
        return cls(
            field=field,
            hypothesis=hypothesis,
            message=message,
            offending=values,
            tag=HYPOTHESIS_TAGS.get(hypothesis),
        )

    @property
    def cited(self) -> str:
        """Message prefixed with the equation tag, e.g. "(hypkp): sup k_p' ..."."""
        return f"{self.tag}: {self.message}" if self.tag else self.message


class GuardReport(BaseModel):
    """Structured abort report of a run guard."""

    guard: str = Field(..., description="positivity | map-jacobian | geometry | distortion | state")
    t: float = Field(..., description="Time at which the guard fired")
    message: str
    details: dict[str, Any] = Field(default_factory=dict)


class CompatReport(BaseModel):
    """Max-norm residuals of the three initial compatibility conditions."""

    trace: float = Field(..., description="Boundary-trace mismatch of u0")
    wall_balance: float = Field(..., description="(1/rho0) div sigma(u0, p0) on the container wall")
    body_balance: float = Field(..., description="Fluid vs rigid acceleration on the body surface")

    @property
    def max_residual(self) -> float:
        return max(self.trace, self.wall_balance, self.body_balance)


class BindingConstraint(BaseModel):
    """Guard that came closest to binding during a run."""

    guard: str
    worst_margin: float = Field(..., description="Smallest remaining margin (in guard units)")
    t: float


class RunSummary(BaseModel):
    """Contents of summary.json."""

    status: str = Field(..., description="completed | guard-abort | numerical-failure")
    steps: int
    t_final: float
    h_error_initial: float
    h_error_final: float
    mass_initial: float
    mass_drift: float
    max_contraction: float
    max_picard_iters: int
    stability_ratio: float = Field(..., description="max solution size over initial data size")
    rho_h2_final: float
    binding: list[BindingConstraint] = Field(default_factory=list)
    ramp_slope_binding: bool = False
    guard_report: GuardReport | None = None
    compat: CompatReport | None = None


class OrderRow(BaseModel):
    """One line of the convergence table."""

    study: str
    kind: str = Field(..., description="space | time")
    resolution: str
    error: float
    order: float | None = None
