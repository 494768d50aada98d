"""1D piston oracle: two viscous gas columns in Lagrangian mass coordinates
separated by a point mass under the same PD feedback as the 2D body.

Nodes 0 .. 2N carry positions and velocities; node N is the piston and
nodes 0, 2N are the walls. Cells carry fixed masses, so each column's mass
is constant by construction.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from ..core.config import ControllerParams, PhysicalParams, PistonConfig
from ..core.exceptions import DomainError, PositivityError
from ..core.logger import get_logger
from .controller import kp

logger = get_logger("piston")


@dataclass(frozen=True)
class PistonState:
    """Node positions/velocities and cell masses of both columns.

    Attributes:
        x: Node positions, shape (2N + 1,), x[N] is the piston
        v: Node velocities, zero at both walls
        dm: Cell masses, shape (2N,)
        t: Time
    """

    x: np.ndarray
    v: np.ndarray
    dm: np.ndarray
    t: float = 0.0

    @property
    def n_cells(self) -> int:
        return len(self.dm) // 2

    @property
    def h(self) -> float:
        return float(self.x[self.n_cells])

    @property
    def ell(self) -> float:
        return float(self.v[self.n_cells])

    @property
    def rho(self) -> np.ndarray:
        return self.dm / np.diff(self.x)

    def column_masses(self) -> tuple[float, float]:
        """Masses of the left and right columns recomputed from rho dx."""
        n = self.n_cells
        mass = self.rho * np.diff(self.x)
        return float(mass[:n].sum()), float(mass[n:].sum())


@dataclass(frozen=True)
class PistonEnergy:
    """Energy components of the 1D system and its dissipation rates."""

    t: float
    kinetic: float
    internal: float
    body: float
    spring: float
    D_visc: float
    D_damp: float
    mass: float

    @property
    def total(self) -> float:
        return self.kinetic + self.internal + self.body + self.spring


@dataclass
class PistonRecord:
    """One output row, laid out like the 2D trajectory CSV (absent fields are zero)."""

    t: float
    h: float
    ell: float
    energy: PistonEnergy

    def to_row(self) -> dict[str, float | int]:
        e = self.energy
        return {
            "t": self.t,
            "h_x": self.h,
            "h_y": 0.0,
            "ell_x": self.ell,
            "ell_y": 0.0,
            "omega": 0.0,
            "E_total": e.total,
            "E_kin": e.kinetic,
            "E_compress": e.internal,
            "E_body": e.body,
            "E_spring": e.spring,
            "D_visc": e.D_visc,
            "D_damp": e.D_damp,
            "mass": e.mass,
            "picard_iters": 0,
            "contraction_max": 0.0,
            "distortion": 0.0,
        }


@dataclass
class PistonRun:
    records: list[PistonRecord] = field(default_factory=list)
    final: PistonState | None = None


class PistonOracle:
    """Semi-implicit integrator of the gas-piston system.

    Viscosity, spring, damper and the linearised pressure are implicit in
    the new velocities, giving one tridiagonal solve per step.

    Example:
        >>> oracle = PistonOracle(config.physical, config.controller, config.piston)
        >>> state = oracle.initial_state()
        >>> state = oracle.step(state, 1e-3)
    """

    def __init__(self, physical: PhysicalParams, controller: ControllerParams, piston: PistonConfig):
        self.physical = physical
        self.controller = controller
        self.config = piston
        self.mu_eff = 2.0 * physical.mu + physical.lam
        self.m = physical.rho_body
        if not self.mu_eff > 0:
            raise DomainError(f"effective viscosity 2 mu + lambda must be positive, got {self.mu_eff}")
        if not 0.0 < piston.h1 < piston.length:
            raise DomainError(f"target h1={piston.h1} outside (0, {piston.length})")

    # ===== State =====

    def initial_state(self, h: float | None = None, uniform_at: float | None = None) -> PistonState:
        """Gas at rest with the piston at ``h`` (default h0).

        Cell masses make the density uniform (rho_bar) when the piston sits
        at ``uniform_at`` (default h1).
        """
        cfg = self.config
        h = cfg.h0 if h is None else h
        ref = cfg.h1 if uniform_at is None else uniform_at
        L, n = cfg.length, cfg.n_cells
        if not 0.0 < h < L:
            raise DomainError(f"piston position {h} outside (0, {L})")
        x = np.concatenate([np.linspace(0.0, h, n + 1), np.linspace(h, L, n + 1)[1:]])
        rb = self.physical.rho_bar
        dm = np.concatenate([np.full(n, rb * ref / n), np.full(n, rb * (L - ref) / n)])
        return PistonState(x=x, v=np.zeros_like(x), dm=dm, t=0.0)

    def node_masses(self, state: PistonState) -> np.ndarray:
        """Lumped masses of interior nodes 1 .. 2N-1; the piston node adds m."""
        dm = state.dm
        M = 0.5 * (dm[:-1] + dm[1:])
        M[state.n_cells - 1] += self.m
        return M

    # ===== Step =====

    def step(self, state: PistonState, dt: float) -> PistonState:
        """Advance one step.

        Raises:
            PositivityError: a cell collapsed or inverted
        """
        p = self.physical
        n = state.n_cells
        t_new = state.t + dt
        dx = np.diff(state.x)
        rho = state.dm / dx
        pressure = p.a * rho**p.gamma
        # -dp/d(dx) per cell, for the linearised pressure at the new level
        stiffness = p.a * p.gamma * rho ** (p.gamma + 1.0) / state.dm
        nu = self.mu_eff / dx + dt * stiffness

        M = self.node_masses(state)
        k_p = kp(t_new, self.controller)
        diag = M / dt + nu[1:] + nu[:-1]
        rhs = M / dt * state.v[1:-1] - pressure[1:] + pressure[:-1]
        piston = n - 1
        diag[piston] += k_p * dt + self.controller.k_d
        rhs[piston] += k_p * (self.config.h1 - state.h)

        ab = np.zeros((3, len(diag)))
        ab[0, 1:] = -nu[1:-1]
        ab[1] = diag
        ab[2, :-1] = -nu[1:-1]
        v_inner = solve_banded((1, 1), ab, rhs)

        v = np.zeros_like(state.v)
        v[1:-1] = v_inner
        x = state.x + dt * v
        widths = np.diff(x)
        if not np.all(widths > 0):
            raise PositivityError(
                f"gas cell collapsed at t={t_new:.6g}",
                t=t_new,
                details={"min_width": float(widths.min())},
            )
        return replace(state, x=x, v=v, t=t_new)

    # ===== Energy =====

    def energy(self, state: PistonState) -> PistonEnergy:
        """Kinetic + internal + body + spring energy and dissipation rates."""
        p = self.physical
        dx = np.diff(state.x)
        rho = state.dm / dx
        gas_nodes = 0.5 * (state.dm[:-1] + state.dm[1:])
        kinetic = float(0.5 * np.sum(gas_nodes * state.v[1:-1] ** 2))
        internal = float(np.sum(state.dm * p.a * rho ** (p.gamma - 1.0) / (p.gamma - 1.0)))
        ell = state.ell
        dv = np.diff(state.v)
        return PistonEnergy(
            t=state.t,
            kinetic=kinetic,
            internal=internal,
            body=0.5 * self.m * ell**2,
            spring=0.5 * kp(state.t, self.controller) * (self.config.h1 - state.h) ** 2,
            D_visc=float(np.sum(self.mu_eff * dv**2 / dx)),
            D_damp=self.controller.k_d * ell**2,
            mass=float(np.sum(rho * dx)),
        )

    def record(self, state: PistonState) -> PistonRecord:
        return PistonRecord(t=state.t, h=state.h, ell=state.ell, energy=self.energy(state))

    def run(self, state: PistonState | None = None) -> PistonRun:
        cfg = self.config
        state = state or self.initial_state()
        out = PistonRun(records=[self.record(state)])
        n_steps = int(round(cfg.T_final / cfg.dt))
        for k in range(n_steps):
            state = self.step(state, cfg.dt)
            # exact time grid
            state = replace(state, t=(k + 1) * cfg.dt)
            out.records.append(self.record(state))
        out.final = state
        logger.info(
            f"Piston run to t={state.t:g}: |h-h1|={abs(state.h - cfg.h1):.3e} "
            f"(initial {abs(cfg.h0 - cfg.h1):.3e})"
        )
        return out


def piston_step(state: PistonState, dt: float, oracle: PistonOracle) -> PistonState:
    return oracle.step(state, dt)


def piston_energy(state: PistonState, oracle: PistonOracle) -> float:
    """Total energy at the state's own time."""
    return oracle.energy(state).total


def run_piston(
    physical: PhysicalParams, controller: ControllerParams, piston: PistonConfig
) -> PistonRun:
    return PistonOracle(physical, controller, piston).run()
