"""Constitutive relations and integral quantities."""

import numpy as np

from ..core.config import PhysicalParams
from ..core.exceptions import DomainError, MapDegenerateError
from ..models.state import FlowMapState, FluidState
from .grid import Grid


def pressure(rho: np.ndarray | float, params: PhysicalParams) -> np.ndarray | float:
    """Barotropic pressure p = a rho^gamma.

    Raises:
        DomainError: if any density is negative
    """
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0):
        raise DomainError(f"pressure needs rho >= 0, got min {float(arr.min())}")
    p = params.a * arr**params.gamma
    return float(p) if np.ndim(rho) == 0 else p


def stress(grad_u: np.ndarray, p: np.ndarray | float, params: PhysicalParams) -> np.ndarray:
    """Cauchy stress 2 mu D(u) + lambda div(u) I - p I.

    Works node-wise: grad_u is (d, d) or (d, d, ...) with grad_u[a, b] = du_a/dx_b.
    """
    grad_u = np.asarray(grad_u, dtype=float)
    d = grad_u.shape[0]
    eye = np.eye(d).reshape((d, d) + (1,) * (grad_u.ndim - 2))
    sym = 0.5 * (grad_u + np.swapaxes(grad_u, 0, 1))
    div = np.trace(grad_u, axis1=0, axis2=1)
    return 2.0 * params.mu * sym + (params.lam * div - p) * eye


def body_mass_inertia(params: PhysicalParams) -> tuple[float, float]:
    """Mass and moment of inertia of the unit ball (dim 3) or disk (dim 2)."""
    if params.dim == 3:
        m = 4.0 * np.pi * params.rho_body / 3.0
        return m, 2.0 * m / 5.0
    if params.dim == 2:
        m = np.pi * params.rho_body
        return m, m / 2.0
    raise DomainError(f"unsupported dimension {params.dim}")


def total_mass(fluid: FluidState, flowmap: FlowMapState, grid: Grid, rho_bar: float) -> float:
    """Physical-frame fluid mass: quadrature of (rho_tilde + rho_bar) det grad X."""
    if np.any(flowmap.detJ <= 0):
        raise MapDegenerateError(
            "non-positive flow-map Jacobian in mass quadrature",
            t=fluid.t,
            details={"min_detJ": float(flowmap.detJ.min())},
        )
    return grid.integrate(fluid.rho_tilde + rho_bar, jacobian=flowmap.detJ)


def mean_density(rho0: np.ndarray, grid: Grid) -> float:
    """Quadrature average of rho0 over the reference annulus (exact for constant fields).

    Raises:
        DomainError: if rho0 is not positive at every node
    """
    if not np.all(rho0 > 0):
        raise DomainError(f"mean density needs rho0 > 0, got min {float(np.min(rho0))}")
    first = rho0.flat[0]
    if np.all(rho0 == first):
        return float(first)
    return grid.integrate(rho0) / grid.area
