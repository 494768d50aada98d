"""Marcher - Picard fixed-point step and the outer time loop.

Each time step solves the frozen-coefficient linear cascade repeatedly with
the nonlinear forcing evaluated at the previous iterate, seeded with the
previous time level, until successive iterates agree to ``picard_tol``.
"""

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..core.config import RunConfig, get_runtime_settings
from ..core.exceptions import (
    ConfigValidationError,
    GuardViolation,
    NumericalFailure,
    PicardNonConvergence,
)
from ..core.logger import get_logger
from ..models.schemas import BindingConstraint, CompatReport, RunSummary, Violation
from ..models.state import (
    BodyState,
    FluidState,
    SimulationState,
    Trajectory,
    TrajectoryRecord,
    rotation_matrix,
)
from .cascade import CascadeRHS, LameSolver, boundary_mismatch, cascade_step, check_positivity
from .controller import kp, ramp_slope_is_binding, validate_controller
from .diagnostics import discrete_norms, energy
from .forcing import evaluate_forcing
from .grid import Grid
from .initial_data import InitialData, compat_residuals, initial_state
from .kinematics import advance_flowmap, advance_rotation, distortion_guard, geometry_guard
from .physics import body_mass_inertia

logger = get_logger("marcher")


class TrajectoryWriter(Protocol):
    """Sink for records and snapshots as they are produced."""

    def write_record(self, record: TrajectoryRecord) -> None: ...

    def write_snapshot(self, state: SimulationState) -> None: ...


@dataclass
class PicardHistory:
    """Successive-difference norms of one Picard solve."""

    differences: list[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.differences)

    @property
    def ratios(self) -> list[float]:
        """d_k / d_{k-1} from the second iterate on (0 when d_{k-1} vanishes)."""
        d = self.differences
        return [d[k] / d[k - 1] if d[k - 1] > 0 else 0.0 for k in range(1, len(d))]

    @property
    def max_ratio(self) -> float:
        return max(self.ratios, default=0.0)


@dataclass
class _Margins:
    """Worst normalised guard margins seen so far (1 = far from binding, 0 = binding)."""

    worst: dict[str, tuple[float, float]] = field(default_factory=dict)

    def update(self, margins: dict[str, float], t: float) -> None:
        for guard, value in margins.items():
            if guard not in self.worst or value < self.worst[guard][0]:
                self.worst[guard] = (value, t)

    def report(self) -> list[BindingConstraint]:
        rows = [
            BindingConstraint(guard=g, worst_margin=v, t=t) for g, (v, t) in self.worst.items()
        ]
        return sorted(rows, key=lambda b: b.worst_margin)


def _max_abs(*arrays) -> float:
    return max(float(np.max(np.abs(np.asarray(a)))) for a in arrays)


class LagrangianMarcher:
    """Time loop of the Lagrangian fluid-body system.

    Owns the grid, the Lame factorisation cache and the run-level guards;
    emits one TrajectoryRecord per step through an optional writer.

    Example:
        >>> marcher = LagrangianMarcher(config)
        >>> initial = make_initial(config.scenario.kind, config.physical, config.geometry, marcher.grid)
        >>> trajectory = marcher.run(initial)
        >>> summary = marcher.summary()
    """

    def __init__(
        self,
        config: RunConfig,
        writer: TrajectoryWriter | None = None,
        grid: Grid | None = None,
        threads: int | None = None,
    ):
        self.config = config
        self.writer = writer
        self.grid = grid or Grid(
            config.grid.n_r, config.grid.n_theta, config.geometry.container_radius
        )
        self.threads = threads or get_runtime_settings().threads
        self.m, self.J = body_mass_inertia(config.physical)
        self.h0 = np.asarray(config.geometry.h0, dtype=float)
        self.h1 = np.asarray(config.geometry.h1, dtype=float)

        self.params = config.physical
        self.solver: LameSolver | None = None
        self.trajectory = Trajectory()
        self.compat: CompatReport | None = None
        self._margins = _Margins()
        self._distortion_warned = False
        self._contraction_warned = False

    # ===== Setup =====

    def prepare(self, initial: InitialData) -> SimulationState:
        """Check hypotheses and compatibility, then build the t = 0 state.

        Raises:
            ConfigValidationError: controller hypotheses fail, or the initial
                compatibility residual exceeds ``march.compat_tol``
            GuardViolation: initial state violates positivity or the geometry margin
        """
        cfg = self.config
        violations = validate_controller(cfg.controller)
        self.compat = compat_residuals(initial, cfg.physical, cfg.geometry, self.grid, cfg.controller)
        if self.compat.max_residual > cfg.march.compat_tol:
            violations.append(
                Violation(
                    field="scenario.kind",
                    hypothesis="compatibility",
                    message=(
                        f"initial compatibility residual {self.compat.max_residual:.3e} "
                        f"exceeds {cfg.march.compat_tol:g}"
                    ),
                    offending=self.compat.model_dump(),
                )
            )
        if violations:
            raise ConfigValidationError(violations)
        ramp_slope_is_binding(cfg.controller)

        self.params = cfg.physical.model_copy(update={"rho_bar": initial.rho_bar})
        self.solver = LameSolver(self.grid, self.params, initial.rho0)
        state = initial_state(initial, cfg.geometry, self.grid)
        check_positivity(state.fluid.rho_tilde, initial.rho_bar, t=0.0)
        geometry_guard(state.body.position(self.h1), cfg.geometry, cfg.march.eta, t=0.0)
        logger.info(
            f"Prepared {initial.kind.value}: grid {self.grid.n_r}x{self.grid.n_theta}, "
            f"dt={cfg.march.dt:g}, compat max={self.compat.max_residual:.3e}"
        )
        return state

    def forcing(self, state: SimulationState) -> CascadeRHS:
        return evaluate_forcing(
            state.fluid,
            state.body,
            state.flowmap,
            state.rho0,
            self.params,
            self.config.controller,
            self.grid,
            state.t,
            self.m,
            threads=self.threads,
        )

    # ===== One step =====

    def _kinematics(
        self,
        state: SimulationState,
        ell_tilde: np.ndarray,
        omega_tilde: float,
        u_tilde: np.ndarray,
        t_next: float,
    ):
        """Rotation, body centre and flow map at the new level for one iterate."""
        march = self.config.march
        dt = march.dt
        body = state.body
        theta = advance_rotation(body.theta_q, 0.5 * (body.omega_tilde + omega_tilde), dt)
        Q = rotation_matrix(theta)
        h_tilde = body.h_tilde + 0.5 * dt * (body.Q @ body.ell_tilde + Q @ ell_tilde)
        h = h_tilde + self.h1
        geo = geometry_guard(h, self.config.geometry, march.eta, t=t_next)
        flowmap = advance_flowmap(
            state.flowmap, Q, u_tilde, dt, self.grid, body_center=h - self.h0, t=t_next
        )
        distortion = distortion_guard(flowmap, march.map_distortion_max, t=t_next)
        new_body = BodyState(
            h_tilde=h_tilde, ell_tilde=ell_tilde, omega_tilde=omega_tilde, theta_q=theta
        )
        return new_body, flowmap, geo, distortion

    def picard_step(
        self, state: SimulationState, rhs: CascadeRHS
    ) -> tuple[SimulationState, CascadeRHS, PicardHistory]:
        """Advance one step by Picard iteration.

        Args:
            state: Converged state at t_n
            rhs: Forcing evaluated at that state

        Returns:
            (state at t_{n+1}, forcing at t_{n+1}, successive-difference history)

        Raises:
            PicardNonConvergence: tolerance not reached in ``picard_max`` iterates
            GuardViolation: positivity, map, geometry or distortion guard fired
        """
        if self.solver is None:
            raise NumericalFailure("marcher not prepared: call prepare() first")
        march = self.config.march
        dt = march.dt
        t_next = (state.step + 1) * dt
        fluid_n, body_n = state.fluid, state.body

        rho_k, u_k = fluid_n.rho_tilde, fluid_n.u_tilde
        ell_k, omega_k = body_n.ell_tilde, body_n.omega_tilde
        history = PicardHistory()

        for k in range(1, march.picard_max + 1):
            body_k, flowmap_k, _, _ = self._kinematics(state, ell_k, omega_k, u_k, t_next)
            iterate = FluidState(rho_tilde=rho_k, u_tilde=u_k, t=t_next)
            rhs_k = evaluate_forcing(
                iterate, body_k, flowmap_k, state.rho0, self.params, self.config.controller,
                self.grid, t_next, self.m, threads=self.threads,
            )
            ell, omega, u, rho = cascade_step(
                fluid_n.rho_tilde, fluid_n.u_tilde, body_n.ell_tilde, body_n.omega_tilde,
                rhs, rhs_k, dt, self.m, self.J, self.params.rho_bar, self.solver,
                scheme=march.time_scheme, boundary=march.boundary, t=t_next,
            )
            if state.step == 0 and k == 1:
                logger.info(
                    f"First-step boundary mismatch of u0 against new rigid data: "
                    f"{boundary_mismatch(fluid_n.u_tilde, ell, omega, self.grid):.3e}"
                )

            diff = _max_abs(rho - rho_k, u - u_k, ell - ell_k, omega - omega_k)
            size = _max_abs(rho, u, ell, omega)
            rel = diff / size if size > 0 else diff
            history.differences.append(rel)
            logger.debug(f"step {state.step + 1} iterate {k}: rel diff {rel:.3e}")
            rho_k, u_k, ell_k, omega_k = rho, u, ell, omega
            if rel <= march.picard_tol:
                break
        else:
            raise PicardNonConvergence(
                f"Picard iteration did not reach {march.picard_tol:g} in {march.picard_max} "
                f"iterates at t={t_next:.6g} (last {history.differences[-1]:.3e}); reduce dt",
                differences=history.differences,
                t=t_next,
            )

        if history.max_ratio > 0.5 and not self._contraction_warned:
            logger.warning(
                f"Picard contraction ratio {history.max_ratio:.3f} above 0.5 at t={t_next:.6g}"
            )
            self._contraction_warned = True

        body, flowmap, geo, distortion = self._kinematics(state, ell_k, omega_k, u_k, t_next)
        fluid = FluidState(rho_tilde=rho_k, u_tilde=u_k, t=t_next)
        new_state = SimulationState(
            fluid=fluid, body=body, flowmap=flowmap, rho0=state.rho0, step=state.step + 1
        )
        if distortion > 0.5 * march.map_distortion_max and not self._distortion_warned:
            logger.warning(
                f"Flow-map distortion {distortion:.4f} passed half the abort threshold "
                f"at t={t_next:.6g}"
            )
            self._distortion_warned = True
        return new_state, self.forcing(new_state), history

    # ===== Records =====

    def margins(self, state: SimulationState, history: PicardHistory | None) -> dict[str, float]:
        """Normalised guard margins of an accepted state."""
        march = self.config.march
        geometry = self.config.geometry
        gap = geometry.container_radius - 1.0 - march.eta
        distance = geometry.container_radius - float(
            np.hypot(*(state.body.position(self.h1) - np.asarray(geometry.center)))
        )
        out = {
            "positivity": float(np.min(state.fluid.rho_tilde + self.params.rho_bar))
            / self.params.rho_bar,
            "map-jacobian": float(np.min(state.flowmap.detJ)),
            "geometry": (distance - 1.0 - march.eta) / gap,
            "distortion": 1.0 - state.flowmap.distortion() / march.map_distortion_max,
        }
        if history is not None:
            out["picard"] = 1.0 - history.iterations / march.picard_max
        return out

    def record(self, state: SimulationState, history: PicardHistory | None = None) -> TrajectoryRecord:
        report = energy(
            state, self.params, self.config.controller, self.grid, self.m, self.J
        )
        margins = self.margins(state, history)
        self._margins.update(margins, state.t)
        return TrajectoryRecord(
            t=state.t,
            h=state.body.position(self.h1),
            ell=state.body.velocity(),
            omega=state.body.omega_tilde,
            energy=report,
            picard_iters=history.iterations if history else 0,
            contraction_max=history.max_ratio if history else 0.0,
            distortion=state.flowmap.distortion(),
            u_h2=discrete_norms(state.fluid.u_tilde, self.grid, state.flowmap)["H2"],
            rho_h2=discrete_norms(state.fluid.rho_tilde, self.grid, state.flowmap)["H2"],
            margins=margins,
        )

    def _emit(self, state: SimulationState, history: PicardHistory | None, keep: bool) -> None:
        rec = self.record(state, history)
        self.trajectory.append(rec)
        every = self.config.output.snapshot_every
        snap = every > 0 and state.step % every == 0
        if keep and snap:
            self.trajectory.snapshots[state.step] = state
        if self.writer is not None:
            self.writer.write_record(rec)
            if snap:
                self.writer.write_snapshot(state)

    # ===== Loop =====

    def run(self, initial: InitialData, keep_snapshots: bool = False) -> Trajectory:
        """March from the initial data to ``T_final``.

        Records are emitted only after every guard has passed; on an abort
        ``self.trajectory`` holds everything emitted so far.
        """
        march = self.config.march
        state = self.prepare(initial)
        self.trajectory = Trajectory()
        self._emit(state, None, keep_snapshots)
        n_steps = int(round(march.T_final / march.dt))
        rhs = self.forcing(state)

        logger.info(f"Marching {n_steps} steps to T={march.T_final:g}")
        for _ in range(n_steps):
            state, rhs, history = self.picard_step(state, rhs)
            self._emit(state, history, keep_snapshots)
            if state.step % 1000 == 0:
                rec = self.trajectory.records[-1]
                logger.info(
                    f"t={state.t:.3f}: |h-h1|={np.linalg.norm(rec.h - self.h1):.3e} "
                    f"E={rec.energy.E_total:.4e} picard={history.iterations}"
                )
        logger.info(f"Run completed at t={state.t:g} after {state.step} steps")
        return self.trajectory

    # ===== Summary =====

    def stability_ratio(self) -> float:
        """max_t solution size over initial data size plus |h1 - h0|."""
        records = self.trajectory.records
        if not records:
            return 0.0
        controller = self.config.controller

        def size(rec: TrajectoryRecord, spring: float) -> float:
            return (
                rec.u_h2
                + rec.rho_h2
                + float(np.linalg.norm(rec.ell))
                + abs(rec.omega)
                + spring * float(np.linalg.norm(rec.h - self.h1))
            )

        first = records[0]
        initial = size(first, 0.0) + float(np.linalg.norm(self.h1 - self.h0))
        peak = max(size(r, float(np.sqrt(kp(r.t, controller)))) for r in records)
        if initial == 0.0:
            return 0.0 if peak == 0.0 else float("inf")
        return peak / initial

    def summary(self, status: str = "completed", error: Exception | None = None) -> RunSummary:
        records = self.trajectory.records
        first, last = (records[0], records[-1]) if records else (None, None)
        mass0 = first.energy.mass if first else 0.0
        drift = (
            max(abs(r.energy.mass - mass0) for r in records) / mass0 if first and mass0 else 0.0
        )
        return RunSummary(
            status=status,
            steps=max(len(records) - 1, 0),
            t_final=last.t if last else 0.0,
            h_error_initial=float(np.linalg.norm(self.h0 - self.h1)),
            h_error_final=float(np.linalg.norm(last.h - self.h1)) if last else float("nan"),
            mass_initial=mass0,
            mass_drift=drift,
            max_contraction=max((r.contraction_max for r in records), default=0.0),
            max_picard_iters=max((r.picard_iters for r in records), default=0),
            stability_ratio=self.stability_ratio(),
            rho_h2_final=last.rho_h2 if last else 0.0,
            binding=self._margins.report(),
            ramp_slope_binding=ramp_slope_is_binding(self.config.controller),
            guard_report=error.to_report() if isinstance(error, GuardViolation) else None,
            compat=self.compat,
        )


def run(
    initial: InitialData,
    config: RunConfig,
    writer: TrajectoryWriter | None = None,
    keep_snapshots: bool = False,
) -> Trajectory:
    """Convenience wrapper: build a marcher and run it."""
    return LagrangianMarcher(config, writer=writer).run(initial, keep_snapshots=keep_snapshots)
