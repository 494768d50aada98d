"""Rotation and flow-map evolution, flow-map algebra and frame transforms."""

import math

import numpy as np

from ..core.config import Geometry
from ..core.exceptions import DistortionViolation, GeometryViolation, MapDegenerateError
from ..models.state import BodyState, FlowMapState, FluidState, rotation_matrix
from .algebra import det2, inv2, matvec, reorthonormalize, rotation_increment, skew
from .grid import Grid

__all__ = [
    "skew",
    "advance_rotation",
    "build_flowmap",
    "identity_flowmap",
    "advance_flowmap",
    "second_derivatives",
    "to_physical",
    "geometry_guard",
    "distortion_guard",
]


def advance_rotation(Q: float | np.ndarray, omega_tilde: float | np.ndarray, dt: float):
    """Integrate Q' = Q A(omega_tilde) over one step with constant omega_tilde.

    In 2D the rotation is carried either as an angle (returns the new angle)
    or as a 2x2 matrix; the update is exact. In 3D the exponential-map
    increment is applied and the result re-orthonormalised.
    """
    if np.ndim(Q) == 0:
        return float(Q) + float(omega_tilde) * dt
    Q = np.asarray(Q, dtype=float)
    if Q.shape == (2, 2):
        angle = math.atan2(Q[1, 0], Q[0, 0])
        return rotation_matrix(angle + float(omega_tilde) * dt)
    return reorthonormalize(Q @ rotation_increment(np.asarray(omega_tilde), dt))


# ===== Flow map =====

def second_derivatives(gradY: np.ndarray, grid: Grid) -> np.ndarray:
    """Second derivatives of Y at X from the chain rule.

    d/dy_m (dY_l/dx_i (X)) = sum_p d2Y_l/dx_p dx_i (X) dX_p/dy_m, so with
    G = grad Y(X) = (grad X)^-1 the system is solved by right-multiplying
    the finite-difference y-derivatives of G by G.

    Returns:
        d2Y[l, p, i], shape (2, 2, 2, n_r, n_theta), symmetrised in (p, i)
    """
    dG = np.stack([np.stack([grid.grad(gradY[l, i]) for i in range(2)]) for l in range(2)])
    # dG[l, i, m] = d G_li / d y_m
    d2Y = np.einsum("limxy,mpxy->lpixy", dG, gradY)
    return 0.5 * (d2Y + np.swapaxes(d2Y, 1, 2))


def build_flowmap(
    disp: np.ndarray, velocity: np.ndarray, grid: Grid, t: float = float("nan")
) -> FlowMapState:
    """Derive grad X, its inverse, det and second derivatives from a displacement field.

    Raises:
        MapDegenerateError: when det grad X <= 0 at any node
    """
    eye = np.eye(2)[:, :, None, None]
    gradX = eye + grid.jacobian(disp)
    detJ = det2(gradX)
    if np.any(detJ <= 0) or not np.all(np.isfinite(detJ)):
        raise MapDegenerateError(
            "flow map degenerated (det grad X <= 0)",
            t=t,
            details={"min_detJ": float(np.nanmin(detJ))},
        )
    gradY = inv2(gradX, detJ)
    d2Y = second_derivatives(gradY, grid)
    return FlowMapState(
        disp=disp,
        X=grid.y + disp,
        gradX=gradX,
        gradY=gradY,
        d2Y=d2Y,
        detJ=detJ,
        velocity=velocity,
    )


def identity_flowmap(grid: Grid) -> FlowMapState:
    zeros = np.zeros((2,) + grid.shape)
    return build_flowmap(zeros, zeros.copy(), grid, t=0.0)


def advance_flowmap(
    flowmap: FlowMapState,
    Q: np.ndarray,
    u_tilde: np.ndarray,
    dt: float,
    grid: Grid,
    body_center: np.ndarray | None = None,
    t: float = float("nan"),
) -> FlowMapState:
    """Trapezoidal step X += dt/2 (Q_n u_n + Q_{n+1} u_{n+1}).

    Args:
        flowmap: Map at the previous level (carries Q_n u_n)
        Q: Rotation at the new level
        u_tilde: Body-frame velocity at the new level
        dt: Time step
        grid: Reference grid
        body_center: New body centre relative to h0; when given, the inner
            boundary is set to h + Q (y - h0) exactly
        t: Time of the new level (for error reports)

    Returns:
        New FlowMapState; the input snapshot is left untouched
    """
    velocity = matvec(Q, u_tilde)
    disp = flowmap.disp + 0.5 * dt * (flowmap.velocity + velocity)
    if body_center is not None:
        y_in = grid.y[:, 0, :]
        disp[:, 0, :] = np.asarray(body_center)[:, None] + matvec(Q, y_in) - y_in
    disp[:, -1, :] = 0.0
    return build_flowmap(disp, velocity, grid, t=t)


def to_physical(
    fluid: FluidState, body: BodyState, flowmap: FlowMapState, rho_bar: float, h0=(0.0, 0.0)
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Invert the change of variables.

    Returns:
        (rho, u, x): density rho_tilde + rho_bar, velocity Q u_tilde, and the
        physical positions X(y) at which both are sampled
    """
    rho = fluid.rho_tilde + rho_bar
    u = matvec(body.Q, fluid.u_tilde)
    x = flowmap.X + np.asarray(h0, dtype=float)[:, None, None]
    return rho, u, x


# ===== Guards =====

def geometry_guard(
    h: np.ndarray, geometry: Geometry, eta: float, t: float = float("nan")
) -> float:
    """Check R - |h - c| > 1 + eta and return the margin R - |h - c| - 1.

    Raises:
        GeometryViolation: when the strict inequality fails
    """
    h = np.asarray(h, dtype=float)
    distance = geometry.container_radius - float(np.hypot(*(h - np.asarray(geometry.center))))
    if not distance > 1.0 + eta:
        raise GeometryViolation(
            f"body too close to the wall: R - |h - c| = {distance:.6g} <= 1 + eta = {1.0 + eta:.6g}",
            t=t,
            details={"h": h, "distance": distance, "eta": eta},
        )
    return distance - 1.0


def distortion_guard(flowmap: FlowMapState, limit: float, t: float = float("nan")) -> float:
    """Return max |grad X - I|; abort above ``limit``."""
    value = flowmap.distortion()
    if value > limit:
        raise DistortionViolation(
            f"flow-map distortion {value:.4g} exceeds {limit:.4g}",
            t=t,
            details={"distortion": value, "limit": limit},
        )
    return value
