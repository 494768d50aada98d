"""Energy functional, dissipation, discrete energy balance and discrete norms.

Energies are divided by rho_bar and integrated in the physical frame, i.e.
over the reference annulus with weight det grad X.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..core.config import ControllerParams, PhysicalParams
from ..core.exceptions import InsufficientSnapshotsError, PositivityError
from ..core.logger import get_logger
from ..models.state import EnergyReport, FlowMapState, SimulationState
from .algebra import cross2
from .controller import kp, kp_slope
from .forcing import FieldDerivatives, FrameProducts
from .grid import Grid
from .physics import total_mass

logger = get_logger("diagnostics")

EPS = float(np.finfo(float).eps)


def rotated_velocity_gradient(derivs: FieldDerivatives, products: FrameProducts) -> np.ndarray:
    """Gt = grad_u G Q, the physical velocity gradient expressed in the body frame."""
    return np.einsum("im...,mk...,kj->ij...", derivs.grad_u, products.G, products.Q, optimize=True)


def energy(
    state: SimulationState,
    params: PhysicalParams,
    controller: ControllerParams,
    grid: Grid,
    m: float,
    J: float,
) -> EnergyReport:
    """Evaluate every energy and dissipation component at one time level.

    Args:
        state: Snapshot (fluid, body, flow map)
        params: Physical constants with the run's rho_bar
        controller: PD constants
        grid: Reference grid
        m: Body mass
        J: Body moment of inertia

    Returns:
        EnergyReport with E_kin, E_compress, E_body, E_spring, shear and bulk
        viscous dissipation, damper dissipation and total mass
    """
    fluid, body, flowmap = state.fluid, state.body, state.flowmap
    t = fluid.t
    rb = params.rho_bar
    w = grid.weights * flowmap.detJ

    E_compress = float(np.sum(w * (params.p_star / (2.0 * rb)) * fluid.rho_tilde**2))
    E_kin = float(np.sum(w * 0.5 * np.sum(fluid.u_tilde**2, axis=0)))
    ell2 = float(np.dot(body.ell_tilde, body.ell_tilde))
    E_body = 0.5 * (m / rb) * ell2 + 0.5 * (J / rb) * body.omega_tilde**2
    E_spring = 0.5 * (kp(t, controller) / rb) * float(np.dot(body.h_tilde, body.h_tilde))

    products = FrameProducts.build(flowmap, body.Q)
    derivs = FieldDerivatives.build(fluid, grid)
    Gt = rotated_velocity_gradient(derivs, products)
    sym = 0.5 * (Gt + np.swapaxes(Gt, 0, 1))
    trace = Gt[0, 0] + Gt[1, 1]
    D_shear = float(np.sum(w * 2.0 * (params.mu / rb) * np.sum(sym**2, axis=(0, 1))))
    D_bulk = float(np.sum(w * (params.lam / rb) * trace**2))
    D_damp = (controller.k_d / rb) * ell2

    return EnergyReport(
        t=t,
        E_kin=E_kin,
        E_compress=E_compress,
        E_body=E_body,
        E_spring=E_spring,
        D_visc_shear=D_shear,
        D_visc_bulk=D_bulk,
        D_damp=D_damp,
        mass=total_mass(fluid, flowmap, grid, rb),
    )


# ===== Energy balance =====

def physical_operators(
    derivs: FieldDerivatives, products: FrameProducts
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """div_x u, Lap_x u and grad_x div_x u, vectors in body-frame components."""
    div_x = np.einsum("im...,mi...->...", derivs.grad_u, products.GQ)
    lap_x = (
        derivs.lap_u
        + np.einsum("iml...,ml...->i...", derivs.hess_u, products.B)
        + np.einsum("il...,l...->i...", derivs.grad_u, products.lapY)
    )
    graddiv_x = np.einsum(
        "kmn...,mi...,nk...->i...", derivs.hess_u, products.GQ, products.GQ, optimize=True
    )
    graddiv_x = graddiv_x + np.einsum(
        "kn...,jk,pi,npj...->i...", derivs.grad_u, products.Q, products.Q, products.d2Y,
        optimize=True,
    )
    return div_x, lap_x, graddiv_x


@dataclass(frozen=True)
class BalanceTerms:
    """Terms of the energy identity dE/dt + D = ramp + cubic + transport + cross.

    Attributes:
        dissipation: D_visc + D_damp, taken from the energy report only
        ramp: (k_p'/(2 rho_bar)) |h - h1|^2
        cubic: compressive density transported by div u
        transport: flux of |u|^2/2 through the body surface
        cross: work of the nonlinear forcing (continuity and momentum
            forcing against rho and u, body force and torque against ell
            and omega)
    """

    dissipation: float
    ramp: float
    cubic: float
    transport: float
    cross: float

    @property
    def rhs(self) -> float:
        return self.ramp + self.cubic + self.transport + self.cross


def energy_rate_terms(
    state: SimulationState,
    params: PhysicalParams,
    controller: ControllerParams,
    grid: Grid,
    m: float,
    J: float,
    report: EnergyReport | None = None,
) -> BalanceTerms:
    """Evaluate every term of the energy identity at one level from the fields.

    Integrals run over the physical fluid domain (reference weights times
    det grad X). Vectors stay in body-frame components since only dot
    products enter.

    Raises:
        PositivityError: if rho_tilde + rho_bar <= 0 at any node
    """
    fluid, body, flowmap = state.fluid, state.body, state.flowmap
    t = fluid.t
    rb, p_star = params.rho_bar, params.p_star
    w = grid.weights * flowmap.detJ
    report = report or energy(state, params, controller, grid, m, J)

    u, rho_s = fluid.u_tilde, fluid.rho_tilde
    rho = rho_s + rb
    if not np.min(rho) > 0:
        raise PositivityError(
            "density not positive in energy balance",
            t=t,
            details={"min_rho": float(np.min(rho))},
        )
    products = FrameProducts.build(flowmap, body.Q)
    derivs = FieldDerivatives.build(fluid, grid)
    div_x, lap_x, graddiv_x = physical_operators(derivs, products)

    # continuity forcing -rho* div u against p* rho* / rho_bar
    continuity = -(p_star / rb) * rho_s**2 * div_x

    advection = np.einsum("im...,mc...,c...->i...", derivs.grad_u, products.GQ, u, optimize=True)
    viscous = params.mu * lap_x + (params.lam + params.mu) * graddiv_x
    u_grad_rho = np.einsum("m...,mc...,c...->...", derivs.grad_rho, products.GQ, u, optimize=True)
    coeff = params.a * params.gamma * rho ** (params.gamma - 2.0)
    momentum = (
        -np.sum(u * advection, axis=0)
        - (1.0 / rb - 1.0 / rho) * np.sum(u * viscous, axis=0)
        + (p_star - coeff) * u_grad_rho
    )

    # pressure mismatch on the body surface; constants integrate to zero
    excess = (p_star * rho_s[0] - params.a * rho[0] ** params.gamma / rb) * grid.inner_normal
    body_force = -grid.boundary_integral(excess)
    body_torque = -float(grid.boundary_integral(cross2(grid.y[:, 0, :], excess)))

    cross = (
        float(np.sum(w * (continuity + momentum)))
        + float(np.dot(body_force, body.ell_tilde))
        + body_torque * body.omega_tilde
    )
    cubic = float(np.sum(w * (p_star / (2.0 * rb)) * rho_s**2 * div_x))

    # div(|u|^2 u / 2) reduces to the body-surface flux; u = 0 on the wall
    u_b = u[:, 0, :]
    normal_flux = np.sum(u_b * grid.inner_normal, axis=0)
    transport = float(grid.boundary_integral(0.5 * np.sum(u_b**2, axis=0) * normal_flux))

    ramp = 0.5 * kp_slope(t, controller) / rb * float(np.dot(body.h_tilde, body.h_tilde))
    return BalanceTerms(
        dissipation=report.D_total, ramp=ramp, cubic=cubic, transport=transport, cross=cross
    )


@dataclass(frozen=True)
class BalanceRow:
    """Energy balance at one interior level of a snapshot window."""

    t: float
    E_total: float
    dE: float
    terms: BalanceTerms

    @property
    def residual(self) -> float:
        return self.dE + self.terms.dissipation - self.terms.rhs

    @property
    def scale(self) -> float:
        return max(self.E_total, self.terms.dissipation, EPS)

    @property
    def normalised(self) -> float:
        return abs(self.residual) / self.scale


def balance_series(
    window: Sequence[SimulationState],
    params: PhysicalParams,
    controller: ControllerParams,
    grid: Grid,
    m: float,
    J: float,
) -> list[BalanceRow]:
    """Energy balance on every interior level of a window of consecutive snapshots.

    dE/dt is the central difference [E(t_{n+1}) - E(t_{n-1})] / (t_{n+1} - t_{n-1})
    in place of the forward difference [E(t_{n+1}) - E(t_n)] / dt, so the rate
    and the right side are evaluated at the same level t_n. Both are first
    order in dt along an implicit Euler trajectory.

    Raises:
        InsufficientSnapshotsError: fewer than three consecutive snapshots
    """
    if len(window) < 3:
        raise InsufficientSnapshotsError(
            f"energy balance needs at least 3 consecutive snapshots, got {len(window)}"
        )
    reports = [energy(s, params, controller, grid, m, J) for s in window]
    rows = []
    for n in range(1, len(window) - 1):
        dt2 = window[n + 1].t - window[n - 1].t
        terms = energy_rate_terms(window[n], params, controller, grid, m, J, report=reports[n])
        row = BalanceRow(
            t=window[n].t,
            E_total=reports[n].E_total,
            dE=(reports[n + 1].E_total - reports[n - 1].E_total) / dt2,
            terms=terms,
        )
        logger.debug(
            f"balance t={row.t:.5f}: r={row.residual:.3e} D={terms.dissipation:.3e} "
            f"cubic={terms.cubic:.3e} transport={terms.transport:.3e} "
            f"cross={terms.cross:.3e} ramp={terms.ramp:.3e}"
        )
        rows.append(row)
    return rows


def balance_residual(
    window: Sequence[SimulationState],
    params: PhysicalParams,
    controller: ControllerParams,
    grid: Grid,
    m: float,
    J: float,
) -> np.ndarray:
    """Normalised energy-balance residuals |r| / max(E, D, eps) on interior levels.

    r(t_n) = dE/dt + D(t_n) - RHS(t_n) with the central difference of
    ``balance_series`` for dE/dt, not the forward difference.

    Raises:
        InsufficientSnapshotsError: fewer than three consecutive snapshots
    """
    rows = balance_series(window, params, controller, grid, m, J)
    return np.array([row.normalised for row in rows])


# ===== Norms =====

def discrete_norms(
    field: np.ndarray, grid: Grid, flowmap: FlowMapState | None = None
) -> dict[str, float]:
    """L2, H1, H2 norms with finite-difference derivatives in the physical frame.

    Args:
        field: Scalar (n_r, n_theta) or vector (k, n_r, n_theta) field
        grid: Reference grid
        flowmap: When given, derivatives are taken in x through grad Y(X)
            and the quadrature carries det grad X

    Returns:
        {"L2": ..., "H1": ..., "H2": ...}
    """
    comps = field[None] if field.ndim == 2 else field
    jac = None if flowmap is None else flowmap.detJ
    l2 = h1 = h2 = 0.0
    for f in comps:
        gy = grid.grad(f)
        hy = grid.hessian(f)
        if flowmap is None:
            gx, hx = gy, hy
        else:
            G = flowmap.gradY
            gx = np.einsum("m...,mj...->j...", gy, G)
            hx = np.einsum("ml...,mj...,lk...->jk...", hy, G, G, optimize=True)
            hx = hx + np.einsum("m...,mjk...->jk...", gy, flowmap.d2Y)
        l2 += grid.integrate(f**2, jac)
        h1 += grid.integrate(np.sum(gx**2, axis=0), jac)
        h2 += grid.integrate(np.sum(hx**2, axis=(0, 1)), jac)
    return {
        "L2": float(np.sqrt(l2)),
        "H1": float(np.sqrt(l2 + h1)),
        "H2": float(np.sqrt(l2 + h1 + h2)),
    }
