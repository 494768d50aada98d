"""Initial-data generators and the three initial compatibility residuals."""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ..core.config import ControllerParams, Geometry, PhysicalParams, ScenarioConfig
from ..core.exceptions import DomainError
from ..core.logger import get_logger
from ..models.enums import ScenarioKind
from ..models.schemas import CompatReport
from ..models.state import BodyState, FluidState, SimulationState
from .algebra import omega_cross
from .cascade import boundary_mismatch, cutoff, lifting
from .forcing import FieldDerivatives, FrameProducts, eval_F3, eval_F4
from .grid import Grid
from .kinematics import build_flowmap
from .physics import body_mass_inertia, mean_density

logger = get_logger("initial_data")

# Support of the density bump as fractions of the gap R - 1
BUMP_INNER = 0.3
BUMP_OUTER = 0.7


@dataclass(frozen=True)
class InitialData:
    """Generated initial fields.

    Attributes:
        rho0: Full initial density (not the perturbation)
        u0: Initial velocity, shape (2, n_r, n_theta)
        ell0: Initial body velocity
        omega0: Initial angular velocity
        h0: Initial body centre
        rho_bar: Mean of rho0 over the reference annulus
    """

    kind: ScenarioKind
    rho0: np.ndarray
    u0: np.ndarray
    ell0: np.ndarray
    omega0: float
    h0: np.ndarray
    rho_bar: float


def bump_profile(s: np.ndarray) -> np.ndarray:
    """C2 bump (4 s (1 - s))^3 on [0, 1], zero outside."""
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    return np.where(inside, (4.0 * s * (1.0 - s)) ** 3, 0.0)


def density_bump(grid: Grid) -> np.ndarray:
    """phi(r, theta) = b(s(r)) (1 + cos theta) / 2 supported in the middle of the gap."""
    ra = 1.0 + BUMP_INNER * (grid.R - 1.0)
    rb = 1.0 + BUMP_OUTER * (grid.R - 1.0)
    s = (grid.rr - ra) / (rb - ra)
    return bump_profile(s) * 0.5 * (1.0 + grid.cos)


def bump_mass(R: float) -> float:
    """Exact integral of the bump over the annulus, by adaptive quadrature."""
    ra = 1.0 + BUMP_INNER * (R - 1.0)
    rb = 1.0 + BUMP_OUTER * (R - 1.0)

    def radial(r: float) -> float:
        s = (r - ra) / (rb - ra)
        return float(bump_profile(s)) * r

    value, _ = quad(radial, ra, rb, epsabs=1e-14, epsrel=1e-13)
    # angular factor: integral of (1 + cos)/2 over a period
    return value * np.pi


def cyclostrophic_density(grid: Grid, params: PhysicalParams, omega0: float) -> np.ndarray:
    """Radial density balancing the centrifugal term of the spin field chi(r) omega0 r e_theta.

    Enthalpy H = a gamma rho^(gamma-1) / (gamma-1) satisfies dH/dr = chi^2 omega0^2 r
    and matches rho_bar at the container wall.
    """
    a, gamma = params.a, params.gamma
    H_wall = a * gamma * params.rho_bar ** (gamma - 1.0) / (gamma - 1.0)

    def integrand(s: float) -> float:
        return float(cutoff(s, grid.R)) ** 2 * s

    drop = np.array(
        [quad(integrand, r, grid.R, epsabs=1e-15, epsrel=1e-13)[0] for r in grid.r]
    )
    H = H_wall - omega0**2 * drop
    if np.any(H <= 0):
        raise DomainError(f"spin rate {omega0} too large for a positive density")
    rho_r = ((gamma - 1.0) * H / (a * gamma)) ** (1.0 / (gamma - 1.0))
    return np.repeat(rho_r[:, None], grid.n_theta, axis=1)


def make_initial(
    kind: ScenarioKind | str,
    params: PhysicalParams,
    geometry: Geometry,
    grid: Grid,
    scenario: ScenarioConfig | None = None,
) -> InitialData:
    """Generate (rho0, u0, ell0, omega0, h0) for a scenario.

    Args:
        kind: displaced-rest, density-bump or rigid-spin
        params: Physical constants (rho_bar is the configured reference density)
        geometry: Container and body centres
        grid: Reference grid
        scenario: Amplitudes epsilon (density-bump) and omega0 (rigid-spin)

    Raises:
        DomainError: unknown kind
    """
    try:
        kind = ScenarioKind(kind)
    except ValueError as exc:
        raise DomainError(f"unknown scenario kind: {kind}") from exc
    scenario = scenario or ScenarioConfig(kind=kind)
    h0 = np.asarray(geometry.h0, dtype=float)
    u0 = np.zeros((2,) + grid.shape)
    omega0 = 0.0

    if kind is ScenarioKind.DISPLACED_REST:
        rho0 = np.full(grid.shape, params.rho_bar)
    elif kind is ScenarioKind.DENSITY_BUMP:
        rho0 = params.rho_bar * (1.0 + scenario.epsilon * density_bump(grid))
    else:
        omega0 = scenario.omega0
        u0 = lifting(np.zeros(2), omega0, grid)
        rho0 = cyclostrophic_density(grid, params, omega0)

    rho_bar = mean_density(rho0, grid)
    logger.info(f"Initial data {kind.value}: rho_bar={rho_bar:.12g}, omega0={omega0:g}")
    return InitialData(
        kind=kind, rho0=rho0, u0=u0, ell0=np.zeros(2), omega0=omega0, h0=h0, rho_bar=rho_bar
    )


def initial_state(initial: InitialData, geometry: Geometry, grid: Grid) -> SimulationState:
    """Lagrangian state at t = 0: X = id, Q = I, so u_tilde = u0."""
    fluid = FluidState(rho_tilde=initial.rho0 - initial.rho_bar, u_tilde=initial.u0.copy(), t=0.0)
    body = BodyState(
        h_tilde=initial.h0 - np.asarray(geometry.h1, dtype=float),
        ell_tilde=initial.ell0.copy(),
        omega_tilde=initial.omega0,
        theta_q=0.0,
    )
    flowmap = build_flowmap(np.zeros((2,) + grid.shape), initial.u0.copy(), grid, t=0.0)
    return SimulationState(fluid=fluid, body=body, flowmap=flowmap, rho0=initial.rho0.copy())


def fluid_acceleration(
    u0: np.ndarray, rho0: np.ndarray, omega0: float, params: PhysicalParams, grid: Grid
) -> np.ndarray:
    """-omega0 x u0 + (1/rho0) div sigma(u0, p0) on the whole grid."""
    lap = np.stack([grid.laplacian(u0[0]), grid.laplacian(u0[1])])
    grad_p = grid.grad(params.a * rho0**params.gamma)
    div_sigma = params.mu * lap + (params.lam + params.mu) * grid.grad_div(u0) - grad_p
    return -omega_cross(omega0, u0) + div_sigma / rho0


def compat_residuals(
    initial: InitialData,
    params: PhysicalParams,
    geometry: Geometry,
    grid: Grid,
    controller: ControllerParams | None = None,
) -> CompatReport:
    """Max-norm residuals of the initial compatibility conditions.

    trace: boundary trace of u0 against rigid/no-slip data.
    wall_balance: (1/rho0) div sigma(u0, p0) on the container wall.
    body_balance: fluid acceleration on the body surface against the rigid
    acceleration F3(0)/m + (F4(0)/J) x (y - h0), including -k_d ell0.
    """
    controller = controller or ControllerParams()
    run_params = params.model_copy(update={"rho_bar": initial.rho_bar})
    trace = boundary_mismatch(initial.u0, initial.ell0, initial.omega0, grid)

    accel = fluid_acceleration(initial.u0, initial.rho0, initial.omega0, run_params, grid)
    wall = float(np.max(np.abs(accel[:, -1, :])))

    state = initial_state(initial, geometry, grid)
    products = FrameProducts.build(state.flowmap, state.body.Q)
    derivs = FieldDerivatives.build(state.fluid, grid)
    m, J = body_mass_inertia(run_params)
    f3 = eval_F3(state.fluid, state.body, products, derivs, run_params, controller, 0.0, grid, m)
    f4 = eval_F4(state.fluid, products, derivs, run_params, grid)
    arm = grid.y[:, 0, :]
    body_accel = (f3 / m)[:, None] + omega_cross(f4 / J, arm)
    body = float(np.max(np.abs(accel[:, 0, :] - body_accel)))

    return CompatReport(trace=float(trace), wall_balance=wall, body_balance=body)
