"""Frozen-coefficient linear cascade: body ODEs, Lame parabolic step, density update.

One call of :func:`cascade_step` solves the linear system with given
right-hand sides f1..f4 in the order body -> velocity -> density.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import gmres, spsolve, splu

from ..core.config import PhysicalParams
from ..core.exceptions import LinearSolverError, NumericalFailure, PositivityError
from ..core.logger import get_logger
from ..models.enums import BoundaryTreatment, TimeScheme
from .algebra import omega_cross
from .grid import Grid

logger = get_logger("cascade")

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class CascadeRHS:
    """Right-hand sides f1 (scalar field), f2 (vector field), f3 (force), f4 (torque)."""

    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    f4: float

    def __post_init__(self):
        for name in ("f1", "f2", "f3", "f4"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericalFailure(f"non-finite values in cascade right-hand side {name}")

    @classmethod
    def zeros(cls, grid: Grid) -> "CascadeRHS":
        return cls(np.zeros(grid.shape), np.zeros((2,) + grid.shape), np.zeros(2), 0.0)


# ===== Body =====

def solve_body(
    ell_prev: np.ndarray,
    omega_prev: float,
    f3: np.ndarray,
    f4: float,
    dt: float,
    m: float,
    J: float,
    f3_prev: np.ndarray | None = None,
    f4_prev: float | None = None,
) -> tuple[np.ndarray, float]:
    """Step m ell' = f3, J omega' = f4.

    Trapezoidal when the previous-level forcing is supplied, one-level
    (explicit in the given values) otherwise.
    """
    f3 = np.asarray(f3, dtype=float)
    if f3_prev is not None:
        f3 = 0.5 * (np.asarray(f3_prev, dtype=float) + f3)
    if f4_prev is not None:
        f4 = 0.5 * (f4_prev + f4)
    ell = np.asarray(ell_prev, dtype=float) + dt * f3 / m
    omega = float(omega_prev) + dt * float(f4) / J
    return ell, omega


# ===== Lifting =====

def cutoff(r: np.ndarray, R: float) -> np.ndarray:
    """C2 radial cutoff: 1 for r <= r1, 0 for r >= r2, quintic smoothstep between."""
    r1 = 1.0 + 0.25 * (R - 1.0)
    r2 = 1.0 + 0.75 * (R - 1.0)
    x = np.clip((np.asarray(r, dtype=float) - r1) / (r2 - r1), 0.0, 1.0)
    smooth = x**3 * (10.0 - 15.0 * x + 6.0 * x**2)
    return 1.0 - smooth


def rigid_field(a: np.ndarray, b: float, y: np.ndarray) -> np.ndarray:
    """a + b x y on a field of positions of shape (2, ...)."""
    a = np.asarray(a, dtype=float).reshape((2,) + (1,) * (y.ndim - 1))
    return a + omega_cross(b, y)


def lifting(a: np.ndarray, b: float, grid: Grid) -> np.ndarray:
    """Lifting R(a, b)(y) = chi(|y - h0|) (a + b x (y - h0))."""
    return cutoff(grid.rr, grid.R) * rigid_field(a, b, grid.y)


def boundary_values(ell: np.ndarray, omega: float, grid: Grid) -> np.ndarray:
    """Dirichlet data: rigid on the body surface, zero on the wall; shape (2, n_r, n_theta)."""
    u = np.zeros((2,) + grid.shape)
    u[:, 0, :] = rigid_field(ell, omega, grid.y[:, 0, :])
    return u


def boundary_mismatch(u: np.ndarray, ell: np.ndarray, omega: float, grid: Grid) -> float:
    """Max difference between the boundary trace of u and the rigid/no-slip data."""
    target = boundary_values(ell, omega, grid)
    inner = np.max(np.abs(u[:, 0, :] - target[:, 0, :]))
    outer = np.max(np.abs(u[:, -1, :]))
    return float(max(inner, outer))


# ===== Lame step =====

@dataclass
class _Factor:
    A_I: sp.csr_matrix
    A_II: sp.csc_matrix
    A_IB: sp.csr_matrix
    lu: object


class LameSolver:
    """Sparse Lame parabolic step with cached factorisations.

    The operator is (1/rho0)(mu Lap + (lambda + mu) grad div) acting on both
    Cartesian components; rho0 is a fixed coefficient field. Boundary rows
    are eliminated so that boundary values are assigned, not solved for.

    Example:
        >>> solver = LameSolver(grid, params, rho0)
        >>> u = solver.step(u_prev, f2, ell, omega, dt)
    """

    def __init__(self, grid: Grid, params: PhysicalParams, rho0: np.ndarray):
        self.grid = grid
        self.params = params
        self.rho0 = np.asarray(rho0, dtype=float)
        N = grid.size
        self._interior = np.concatenate([grid.interior_index, N + grid.interior_index])
        self._boundary = np.concatenate([grid.boundary_index, N + grid.boundary_index])
        self._factors: dict[tuple[str, float], _Factor] = {}

    @property
    def operator(self) -> sp.csr_matrix:
        """(1/rho0) times the Lame operator on stacked (u_x, u_y)."""
        if not hasattr(self, "_operator"):
            g, p = self.grid, self.params
            lm = p.lam + p.mu
            L = sp.bmat(
                [
                    [p.mu * g.Lap + lm * g.Dxx, lm * g.Dxy],
                    [lm * g.Dxy, p.mu * g.Lap + lm * g.Dyy],
                ],
                format="csr",
            )
            inv_rho = 1.0 / self.rho0.ravel()
            self._operator = (sp.diags(np.concatenate([inv_rho, inv_rho])) @ L).tocsr()
        return self._operator

    def _system(self, scheme: TimeScheme, dt: float) -> sp.csr_matrix:
        I = sp.identity(2 * self.grid.size, format="csr")
        theta = 0.5 if scheme is TimeScheme.CRANK_NICOLSON else 1.0
        return (I / dt - theta * self.operator).tocsr()

    def _factor(self, scheme: TimeScheme, dt: float) -> "_Factor":
        key = (scheme.value, dt)
        if key not in self._factors:
            A = self._system(scheme, dt)
            A_I = A[self._interior]
            A_II = A_I[:, self._interior].tocsc()
            self._factors[key] = _Factor(
                A_I=A_I, A_II=A_II, A_IB=A_I[:, self._boundary], lu=splu(A_II)
            )
            logger.debug(f"Factorised Lame system ({scheme.value}, dt={dt:g}, n={A_II.shape[0]})")
        return self._factors[key]

    def step(
        self,
        u_prev: np.ndarray,
        f2: np.ndarray,
        ell_next: np.ndarray,
        omega_next: float,
        dt: float,
        scheme: TimeScheme = TimeScheme.IMPLICIT_EULER,
        boundary: BoundaryTreatment = BoundaryTreatment.STRONG,
    ) -> np.ndarray:
        """Advance u one step with Dirichlet data (ell_next, omega_next).

        Raises:
            LinearSolverError: relative residual above 1e-10 after refinement
        """
        g = self.grid
        fac = self._factor(scheme, dt)
        u_prev_flat = u_prev.reshape(2, -1).ravel()
        rhs = u_prev_flat / dt + f2.reshape(2, -1).ravel()
        if scheme is TimeScheme.CRANK_NICOLSON:
            rhs = rhs + 0.5 * (self.operator @ u_prev_flat)

        if boundary is BoundaryTreatment.LIFTING:
            shift = lifting(ell_next, omega_next, g).reshape(-1)
            rhs_I = rhs[self._interior] - fac.A_I @ shift
            v_I = self._solve(fac, rhs_I)
            u = shift.copy()
            u[self._interior] += v_I
            u[self._boundary] = boundary_values(ell_next, omega_next, g).reshape(-1)[self._boundary]
        else:
            u_B = boundary_values(ell_next, omega_next, g).reshape(-1)[self._boundary]
            rhs_I = rhs[self._interior] - fac.A_IB @ u_B
            u = np.empty(2 * g.size)
            u[self._interior] = self._solve(fac, rhs_I)
            u[self._boundary] = u_B
        return u.reshape((2,) + g.shape)

    def _solve(self, fac: "_Factor", rhs_I: np.ndarray) -> np.ndarray:
        A_II = fac.A_II
        norm = float(np.linalg.norm(rhs_I))
        if norm == 0.0:
            return np.zeros_like(rhs_I)
        x = fac.lu.solve(rhs_I)
        history = [float(np.linalg.norm(A_II @ x - rhs_I)) / norm]
        if history[-1] <= RESIDUAL_TOL:
            return x
        x, info = gmres(A_II, rhs_I, x0=x, rtol=1e-13, atol=0.0, maxiter=50)
        history.append(float(np.linalg.norm(A_II @ x - rhs_I)) / norm)
        if history[-1] <= RESIDUAL_TOL:
            logger.debug(f"Lame solve refined by GMRES (residuals {history})")
            return x
        raise LinearSolverError(
            f"Lame solve residual {history[-1]:.3e} above {RESIDUAL_TOL:g} (gmres info={info})",
            residual_history=history,
        )

    def solve_steady(
        self, f2: np.ndarray, ell: np.ndarray, omega: float
    ) -> np.ndarray:
        """Solve -(1/rho0)(mu Lap + (lambda+mu) grad div) u = f2 with rigid/no-slip data."""
        g = self.grid
        A = (-self.operator).tocsr()
        u_B = boundary_values(ell, omega, g).reshape(-1)[self._boundary]
        A_II = A[self._interior][:, self._interior].tocsc()
        rhs_I = f2.reshape(-1)[self._interior] - A[self._interior][:, self._boundary] @ u_B
        u = np.empty(2 * g.size)
        u[self._interior] = spsolve(A_II, rhs_I)
        u[self._boundary] = u_B
        return u.reshape((2,) + g.shape)

    def steady_residual(self, u: np.ndarray, f2: np.ndarray) -> float:
        """Max interior residual of the steady elliptic system."""
        r = (-self.operator @ u.reshape(-1)) - f2.reshape(-1)
        return float(np.max(np.abs(r[self._interior])))


def lame_step(
    u_prev: np.ndarray,
    f2: np.ndarray,
    ell_next: np.ndarray,
    omega_next: float,
    rho0: np.ndarray,
    dt: float,
    params: PhysicalParams,
    grid: Grid,
    scheme: TimeScheme = TimeScheme.IMPLICIT_EULER,
    boundary: BoundaryTreatment = BoundaryTreatment.STRONG,
    solver: LameSolver | None = None,
) -> np.ndarray:
    """One Lame parabolic step; builds a throwaway solver when none is passed."""
    solver = solver or LameSolver(grid, params, rho0)
    return solver.step(u_prev, f2, ell_next, omega_next, dt, scheme=scheme, boundary=boundary)


# ===== Density =====

def density_step(
    rho_prev: np.ndarray,
    u_next: np.ndarray,
    f1: np.ndarray,
    rho0: np.ndarray,
    dt: float,
    grid: Grid,
    rho_bar: float,
    u_prev: np.ndarray | None = None,
    t: float = float("nan"),
) -> np.ndarray:
    """Node-wise update rho_tilde += dt (f1 - rho0 div u).

    The divergence is the trapezoidal average of both levels when u_prev is
    given.

    Raises:
        PositivityError: if rho_tilde + rho_bar <= 0 anywhere
    """
    div = grid.div(u_next)
    if u_prev is not None:
        div = 0.5 * (div + grid.div(u_prev))
    rho = rho_prev + dt * (f1 - rho0 * div)
    check_positivity(rho, rho_bar, t)
    return rho


def check_positivity(rho_tilde: np.ndarray, rho_bar: float, t: float = float("nan")) -> float:
    """Return min(rho_tilde + rho_bar); raise when it is not positive."""
    low = float(np.min(rho_tilde + rho_bar))
    if not low > 0.0:
        raise PositivityError(
            f"density lost positivity: min rho = {low:.6g}", t=t, details={"min_rho": low}
        )
    return low


# ===== Cascade =====

def cascade_step(
    rho_prev: np.ndarray,
    u_prev: np.ndarray,
    ell_prev: np.ndarray,
    omega_prev: float,
    rhs_prev: CascadeRHS,
    rhs_next: CascadeRHS,
    dt: float,
    m: float,
    J: float,
    rho_bar: float,
    solver: LameSolver,
    scheme: TimeScheme = TimeScheme.IMPLICIT_EULER,
    boundary: BoundaryTreatment = BoundaryTreatment.STRONG,
    t: float = float("nan"),
) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
    """Solve the linear cascade over one step.

    Body forcing and f1 are averaged over both levels; f2 enters at the new
    level (averaged under Crank-Nicolson).

    Returns:
        (ell_next, omega_next, u_next, rho_next)
    """
    ell, omega = solve_body(
        ell_prev, omega_prev, rhs_next.f3, rhs_next.f4, dt, m, J,
        f3_prev=rhs_prev.f3, f4_prev=rhs_prev.f4,
    )
    f2 = rhs_next.f2
    if scheme is TimeScheme.CRANK_NICOLSON:
        f2 = 0.5 * (rhs_prev.f2 + rhs_next.f2)
    u = solver.step(u_prev, f2, ell, omega, dt, scheme=scheme, boundary=boundary)
    f1 = 0.5 * (rhs_prev.f1 + rhs_next.f1)
    rho = density_step(
        rho_prev, u, f1, solver.rho0, dt, solver.grid, rho_bar, u_prev=u_prev, t=t
    )
    return ell, omega, u, rho
