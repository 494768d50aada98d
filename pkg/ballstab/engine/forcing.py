"""Nonlinear forcing terms F1..F4 of the transformed system.

All four evaluators share one :class:`FrameProducts` (flow-map algebra) and
one :class:`FieldDerivatives` (finite-difference derivatives of the
iterate), both built once per Picard iterate. Index conventions:

    grad_u[i, m]     = d u_i / d y_m
    hess_u[i, m, l]  = d^2 u_i / d y_m d y_l
    G[m, j]          = d Y_m / d x_j at X
    d2Y[l, p, i]     = d^2 Y_l / d x_p d x_i at X
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core.config import ControllerParams, PhysicalParams
from ..core.exceptions import PositivityError
from ..models.state import BodyState, FlowMapState, FluidState
from .algebra import cross2, omega_cross
from .cascade import CascadeRHS
from .controller import feedback_lagrangian
from .grid import Grid


@dataclass(frozen=True)
class FrameProducts:
    """Cached combinations of grad Y(X) and Q; all vanish at X = id, Q = I.

    Attributes:
        G: grad Y(X)
        GQ: G Q
        A: (G Q)^T - I, indexed [i, m] like grad_u
        B: G G^T - I
        d2Y: second derivatives of Y at X
        lapY: lapY[l] = sum_p d2Y[l, p, p]
        detJ: det grad X
        Q: rotation matrix
    """

    G: np.ndarray
    GQ: np.ndarray
    A: np.ndarray
    B: np.ndarray
    d2Y: np.ndarray
    lapY: np.ndarray
    detJ: np.ndarray
    Q: np.ndarray

    @classmethod
    def build(cls, flowmap: FlowMapState, Q: np.ndarray) -> "FrameProducts":
        G = flowmap.gradY
        eye = np.eye(2)[:, :, None, None]
        GQ = np.einsum("mc...,cj->mj...", G, Q)
        A = np.swapaxes(GQ, 0, 1) - eye
        B = np.einsum("mp...,lp...->ml...", G, G) - eye
        lapY = np.einsum("lpp...->l...", flowmap.d2Y)
        return cls(G=G, GQ=GQ, A=A, B=B, d2Y=flowmap.d2Y, lapY=lapY, detJ=flowmap.detJ, Q=Q)


@dataclass(frozen=True)
class FieldDerivatives:
    """Finite-difference derivatives of an iterate (rho_tilde, u_tilde)."""

    grad_u: np.ndarray
    hess_u: np.ndarray
    lap_u: np.ndarray
    div_u: np.ndarray
    grad_div_u: np.ndarray
    grad_rho: np.ndarray

    @classmethod
    def build(cls, fluid: FluidState, grid: Grid) -> "FieldDerivatives":
        u = fluid.u_tilde
        grad_u = grid.jacobian(u)
        hess_u = np.stack([grid.hessian(u[0]), grid.hessian(u[1])])
        lap_u = np.stack([grid.laplacian(u[0]), grid.laplacian(u[1])])
        return cls(
            grad_u=grad_u,
            hess_u=hess_u,
            lap_u=lap_u,
            div_u=grad_u[0, 0] + grad_u[1, 1],
            grad_div_u=grid.grad_div(u),
            grad_rho=grid.grad(fluid.rho_tilde),
        )


# ===== Node-wise formulas =====

def f1_nodes(
    rho: np.ndarray, rho0: np.ndarray, grad_u: np.ndarray, A: np.ndarray
) -> np.ndarray:
    """-rho grad_u : A - (rho - rho0) div u."""
    div_u = grad_u[0, 0] + grad_u[1, 1]
    return -rho * np.einsum("im...,im...->...", grad_u, A) - (rho - rho0) * div_u


def f2_nodes(
    rho: np.ndarray,
    rho0: np.ndarray,
    u: np.ndarray,
    omega: float,
    grad_u: np.ndarray,
    hess_u: np.ndarray,
    lap_u: np.ndarray,
    grad_div_u: np.ndarray,
    grad_rho: np.ndarray,
    G: np.ndarray,
    Q: np.ndarray,
    d2Y: np.ndarray,
    params: PhysicalParams,
) -> np.ndarray:
    """Momentum forcing with the linear Lame part (coefficient 1/rho0) removed.

    Groups: rotation, metric correction of the Laplacian, curvature of Y in
    the Laplacian, density mismatch of the Laplacian, frame/metric
    correction of grad div, density mismatch of grad div, pressure.
    """
    mu, lm = params.mu, params.lam + params.mu
    eye = np.eye(2).reshape((2, 2) + (1,) * (rho.ndim))
    GQ = np.einsum("mc...,cj->mj...", G, Q)
    B = np.einsum("mp...,lp...->ml...", G, G) - eye
    lapY = np.einsum("lpp...->l...", d2Y)
    mismatch = (rho0 - rho) / (rho0 * rho)

    rotation = -omega_cross(omega, u)
    lap_metric = (mu / rho) * np.einsum("iml...,ml...->i...", hess_u, B)
    lap_curvature = (mu / rho) * np.einsum("il...,l...->i...", grad_u, lapY)
    lap_density = mu * mismatch * lap_u

    graddiv_frame = np.einsum("kmn...,mi...,nk...->i...", hess_u, GQ, GQ, optimize=True)
    graddiv_frame = graddiv_frame + np.einsum(
        "kn...,jk,pi,npj...->i...", grad_u, Q, Q, d2Y, optimize=True
    )
    graddiv_geom = (lm / rho) * (graddiv_frame - grad_div_u)
    graddiv_density = lm * mismatch * grad_div_u

    coeff = params.a * params.gamma * rho ** (params.gamma - 2.0)
    pressure_group = -coeff * np.einsum("li...,l...->i...", GQ, grad_rho)

    return (
        rotation
        + lap_metric
        + lap_curvature
        + lap_density
        + graddiv_geom
        + graddiv_density
        + pressure_group
    )


def boundary_traction(
    rho_b: np.ndarray,
    grad_u_b: np.ndarray,
    G_b: np.ndarray,
    Q: np.ndarray,
    normal: np.ndarray,
    params: PhysicalParams,
) -> np.ndarray:
    """Body-frame traction [mu(Gt + Gt^T) + lambda tr(Gt) I - (p - a rho_bar^gamma) I] n.

    Gt = grad_u G Q is the rotated physical velocity gradient. The constant
    reference pressure is removed since it integrates to zero on the circle.
    """
    Gt = np.einsum("im...,mk...,kj->ij...", grad_u_b, G_b, Q, optimize=True)
    trace = Gt[0, 0] + Gt[1, 1]
    p_rel = params.a * rho_b**params.gamma - params.a * params.rho_bar**params.gamma
    sigma = params.mu * (Gt + np.swapaxes(Gt, 0, 1))
    sigma[0, 0] += params.lam * trace - p_rel
    sigma[1, 1] += params.lam * trace - p_rel
    return np.einsum("ab...,b...->a...", sigma, normal)


# ===== Evaluators =====

def eval_F1(fluid: FluidState, products: FrameProducts, derivs: FieldDerivatives,
            rho0: np.ndarray, params: PhysicalParams) -> np.ndarray:
    rho = fluid.rho_tilde + params.rho_bar
    return f1_nodes(rho, rho0, derivs.grad_u, products.A)


def eval_F2(fluid: FluidState, body: BodyState, products: FrameProducts,
            derivs: FieldDerivatives, rho0: np.ndarray, params: PhysicalParams) -> np.ndarray:
    """Momentum forcing field.

    Raises:
        PositivityError: if rho_tilde + rho_bar <= 0 at any node
    """
    rho = fluid.rho_tilde + params.rho_bar
    if not np.min(rho) > 0:
        raise PositivityError(
            "density not positive in momentum forcing",
            t=fluid.t,
            details={"min_rho": float(np.min(rho))},
        )
    return f2_nodes(
        rho,
        rho0,
        fluid.u_tilde,
        body.omega_tilde,
        derivs.grad_u,
        derivs.hess_u,
        derivs.lap_u,
        derivs.grad_div_u,
        derivs.grad_rho,
        products.G,
        products.Q,
        products.d2Y,
        params,
    )


def _surface_traction(fluid: FluidState, products: FrameProducts, derivs: FieldDerivatives,
                      params: PhysicalParams, grid: Grid) -> np.ndarray:
    return boundary_traction(
        fluid.rho_tilde[0] + params.rho_bar,
        derivs.grad_u[:, :, 0, :],
        products.G[:, :, 0, :],
        products.Q,
        grid.inner_normal,
        params,
    )


def eval_F3(fluid: FluidState, body: BodyState, products: FrameProducts,
            derivs: FieldDerivatives, params: PhysicalParams, controller: ControllerParams,
            t: float, grid: Grid, m: float) -> np.ndarray:
    """Body force: gyroscopic term, surface traction and the feedback law."""
    traction = _surface_traction(fluid, products, derivs, params, grid)
    surface = grid.boundary_integral(traction)
    gyro = m * omega_cross(body.omega_tilde, body.ell_tilde)
    control = feedback_lagrangian(t, body.h_tilde, body.ell_tilde, products.Q, controller)
    return -gyro - surface + control


def eval_F4(fluid: FluidState, products: FrameProducts, derivs: FieldDerivatives,
            params: PhysicalParams, grid: Grid) -> float:
    """Body torque about the centre: -integral of (y - h0) x traction."""
    traction = _surface_traction(fluid, products, derivs, params, grid)
    arm = grid.y[:, 0, :]
    return -float(grid.boundary_integral(cross2(arm, traction)))


def evaluate_forcing(
    fluid: FluidState,
    body: BodyState,
    flowmap: FlowMapState,
    rho0: np.ndarray,
    params: PhysicalParams,
    controller: ControllerParams,
    grid: Grid,
    t: float,
    m: float,
    threads: int = 1,
) -> CascadeRHS:
    """Evaluate F1..F4 on one iterate and pack them as a cascade right-hand side.

    With ``threads > 1`` the four evaluators run concurrently on the shared
    read-only products.
    """
    products = FrameProducts.build(flowmap, body.Q)
    derivs = FieldDerivatives.build(fluid, grid)
    jobs = {
        "f1": (eval_F1, (fluid, products, derivs, rho0, params)),
        "f2": (eval_F2, (fluid, body, products, derivs, rho0, params)),
        "f3": (eval_F3, (fluid, body, products, derivs, params, controller, t, grid, m)),
        "f4": (eval_F4, (fluid, products, derivs, params, grid)),
    }
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            futures = {k: pool.submit(fn, *args) for k, (fn, args) in jobs.items()}
            out = {k: f.result() for k, f in futures.items()}
    else:
        out = {k: fn(*args) for k, (fn, args) in jobs.items()}
    return CascadeRHS(f1=out["f1"], f2=out["f2"], f3=out["f3"], f4=out["f4"])
