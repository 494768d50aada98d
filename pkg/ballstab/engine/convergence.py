"""Manufactured-solution convergence studies.

Sources are derived symbolically with sympy and evaluated on each grid;
observed orders are log2 error ratios between consecutive refinements.
"""

import math
from collections.abc import Callable

import numpy as np
import sympy as sp

from ..core.config import ConvergenceConfig, PhysicalParams, RunConfig
from ..core.exceptions import OrderBelowThreshold
from ..core.logger import get_logger
from ..models.enums import TimeScheme
from ..models.schemas import OrderRow
from .cascade import LameSolver, density_step, solve_body
from .diagnostics import discrete_norms
from .grid import Grid
from .kinematics import advance_flowmap, build_flowmap

logger = get_logger("convergence")

x, y, r, th = sp.symbols("x y r theta", real=True)

# Body-ODE trapezoid must reproduce linear forcing to round-off
EXACTNESS_TOL = 1e-12
# Temporal studies run on the coarsest admissible grid
TIME_GRID = (17, 32)
T_END = 0.4


def field_function(expr: sp.Expr) -> Callable[[Grid], np.ndarray]:
    """Compile a sympy expression in (x, y) into a grid sampler."""
    fn = sp.lambdify((x, y), expr, "numpy")

    def sample(grid: Grid) -> np.ndarray:
        return np.broadcast_to(np.asarray(fn(grid.y[0], grid.y[1]), dtype=float), grid.shape).copy()

    return sample


def vector_function(exprs) -> Callable[[Grid], np.ndarray]:
    parts = [field_function(e) for e in exprs]
    return lambda grid: np.stack([p(grid) for p in parts])


def bubble(R: float) -> sp.Expr:
    """Polynomial vanishing on r = 1 and r = R."""
    return (x**2 + y**2 - 1) * (R**2 - x**2 - y**2)


def lame_expr(u, params: PhysicalParams):
    """mu Lap u + (lambda + mu) grad div u, symbolically."""
    div = sp.diff(u[0], x) + sp.diff(u[1], y)
    lm = params.lam + params.mu
    return [
        params.mu * (sp.diff(u[0], x, 2) + sp.diff(u[0], y, 2)) + lm * sp.diff(div, x),
        params.mu * (sp.diff(u[1], x, 2) + sp.diff(u[1], y, 2)) + lm * sp.diff(div, y),
    ]


def observed_orders(errors: list[float]) -> list[float | None]:
    """log2 ratios between consecutive halvings; None for the first entry."""
    orders: list[float | None] = [None]
    for coarse, fine in zip(errors[:-1], errors[1:], strict=True):
        orders.append(math.log2(coarse / fine) if fine > 0 and coarse > 0 else None)
    return orders


def _rows(study: str, kind: str, labels: list[str], errors: list[float]) -> list[OrderRow]:
    return [
        OrderRow(study=study, kind=kind, resolution=label, error=err, order=order)
        for label, err, order in zip(labels, errors, observed_orders(errors), strict=True)
    ]


class ConvergenceStudy:
    """Runs every manufactured problem and checks the observed orders.

    Example:
        >>> study = ConvergenceStudy(config)
        >>> table = study.run()   # raises OrderBelowThreshold on failure
    """

    def __init__(self, config: RunConfig):
        self.params = config.physical
        self.settings: ConvergenceConfig = config.convergence
        self.R = config.geometry.container_radius
        self.grids = [
            Grid(nr, nt, self.R)
            for nr, nt in zip(self.settings.n_r_list, self.settings.n_theta_list, strict=True)
        ]
        self.labels = [f"{g.n_r}x{g.n_theta}" for g in self.grids]
        self.rho0_expr = 1 + sp.Rational(1, 5) * (x**2 + y**2) / self.R**2
        b = bubble(self.R)
        self.u_expr = [b * y / self.R**4, b * x**2 / self.R**5]

    # ===== Space =====

    def lame_space(self) -> list[OrderRow]:
        """Steady Lame problem with a polynomial solution vanishing on both circles."""
        L = lame_expr(self.u_expr, self.params)
        f2 = vector_function([-Li / self.rho0_expr for Li in L])
        exact = vector_function(self.u_expr)
        rho0 = field_function(self.rho0_expr)
        errors = []
        for g in self.grids:
            solver = LameSolver(g, self.params, rho0(g))
            u = solver.solve_steady(f2(g), np.zeros(2), 0.0)
            errors.append(float(np.max(np.abs(u - exact(g)))))
        return _rows("lame-steady", "space", self.labels, errors)

    def density_space(self) -> list[OrderRow]:
        """Density update with exact solution t psi(y) under a frozen velocity."""
        psi = sp.Rational(1, 10) * (x**2 + y**2) / self.R**2
        div = sp.diff(self.u_expr[0], x) + sp.diff(self.u_expr[1], y)
        f1 = field_function(psi + self.rho0_expr * div)
        u_exact = vector_function(self.u_expr)
        psi_f = field_function(psi)
        rho0 = field_function(self.rho0_expr)
        n_steps, dt = 10, 0.01
        errors = []
        for g in self.grids:
            u, src, r0 = u_exact(g), f1(g), rho0(g)
            rho = np.zeros(g.shape)
            for _ in range(n_steps):
                rho = density_step(rho, u, src, r0, dt, g, rho_bar=1.0, u_prev=u)
            errors.append(float(np.max(np.abs(rho - n_steps * dt * psi_f(g)))))
        return _rows("density", "space", self.labels, errors)

    def norms_space(self) -> list[OrderRow]:
        """H2 norm of |y|^2 against its closed-form value."""
        f = x**2 + y**2
        grad = [sp.diff(f, x), sp.diff(f, y)]
        hess = [sp.diff(f, a, b) for a in (x, y) for b in (x, y)]
        density = f**2 + sum(gi**2 for gi in grad) + sum(hi**2 for hi in hess)
        polar = sp.simplify(density.subs({x: r * sp.cos(th), y: r * sp.sin(th)}))
        exact = math.sqrt(float(sp.integrate(polar * r, (r, 1, self.R), (th, 0, 2 * sp.pi))))
        sample = field_function(f)
        errors = [abs(discrete_norms(sample(g), g)["H2"] - exact) for g in self.grids]
        return _rows("norms-h2", "space", self.labels, errors)

    def flowmap_space(self) -> list[OrderRow]:
        """det grad X of a smooth displacement against the symbolic Jacobian."""
        eps = sp.Rational(1, 20)
        disp = [eps * e for e in self.u_expr]
        jac = sp.Matrix(
            [[1 + sp.diff(disp[0], x), sp.diff(disp[0], y)],
             [sp.diff(disp[1], x), 1 + sp.diff(disp[1], y)]]
        ).det()
        exact = field_function(jac)
        disp_f = vector_function(disp)
        errors = []
        for g in self.grids:
            fm = build_flowmap(disp_f(g), np.zeros((2,) + g.shape), g)
            errors.append(float(np.max(np.abs(fm.detJ - exact(g)))))
        return _rows("flowmap-jacobian", "space", self.labels, errors)

    # ===== Time =====

    def lame_time(self, scheme: TimeScheme = TimeScheme.IMPLICIT_EULER) -> list[OrderRow]:
        """Parabolic Lame step against u(t) = exp(-t) phi(y).

        The source uses the discrete operator so that only the time error remains.
        """
        g = Grid(*TIME_GRID, self.R)
        phi = vector_function(self.u_expr)(g)
        rho0 = field_function(self.rho0_expr)(g)
        solver = LameSolver(g, self.params, rho0)
        P_phi = (solver.operator @ phi.reshape(-1)).reshape(phi.shape)

        def source(t: float) -> np.ndarray:
            # d/dt u - P u with u = e^-t phi
            return -math.exp(-t) * (phi + P_phi)

        errors, labels = [], []
        for dt in self.settings.dt_list:
            n = int(round(T_END / dt))
            u = phi.copy()
            for k in range(n):
                t_new = (k + 1) * dt
                f2 = source(t_new)
                if scheme is TimeScheme.CRANK_NICOLSON:
                    f2 = 0.5 * (source(k * dt) + f2)
                u = solver.step(u, f2, np.zeros(2), 0.0, dt, scheme=scheme)
            errors.append(float(np.max(np.abs(u - math.exp(-n * dt) * phi))))
            labels.append(f"dt={dt:g}")
        name = "lame-implicit-euler" if scheme is TimeScheme.IMPLICIT_EULER else "lame-crank-nicolson"
        return _rows(name, "time", labels, errors)

    def flowmap_time(self) -> list[OrderRow]:
        """Trapezoidal map update for u(t) = cos(t) v(y): X = y + sin(t) v."""
        g = Grid(*TIME_GRID, self.R)
        v = 0.05 * vector_function(self.u_expr)(g)
        Q = np.eye(2)
        errors, labels = [], []
        for dt in self.settings.dt_list:
            n = int(round(T_END / dt))
            fm = build_flowmap(np.zeros((2,) + g.shape), v.copy(), g)
            for k in range(n):
                fm = advance_flowmap(fm, Q, math.cos((k + 1) * dt) * v, dt, g)
            errors.append(float(np.max(np.abs(fm.disp - math.sin(n * dt) * v))))
            labels.append(f"dt={dt:g}")
        return _rows("flowmap-trapezoid", "time", labels, errors)

    def body_time(self) -> list[OrderRow]:
        """m ell' = alpha + beta t integrated by the trapezoid: exact."""
        m, J = 2.0, 0.5
        alpha, beta = np.array([0.3, -0.2]), np.array([0.1, 0.4])
        errors, labels = [], []
        for dt in self.settings.dt_list:
            n = int(round(T_END / dt))
            ell, omega = np.zeros(2), 0.0
            for k in range(n):
                ell, omega = solve_body(
                    ell, omega, alpha + beta * (k + 1) * dt, 0.7 * (k + 1) * dt, dt, m, J,
                    f3_prev=alpha + beta * k * dt, f4_prev=0.7 * k * dt,
                )
            T = n * dt
            ell_exact = (alpha * T + 0.5 * beta * T**2) / m
            omega_exact = 0.35 * T**2 / J
            errors.append(float(max(np.max(np.abs(ell - ell_exact)), abs(omega - omega_exact))))
            labels.append(f"dt={dt:g}")
        return [
            OrderRow(study="body-trapezoid", kind="exact", resolution=lab, error=e)
            for lab, e in zip(labels, errors, strict=True)
        ]

    def lame_space_time(self) -> list[OrderRow]:
        """Joint refinement (h, dt) with the continuous source: min(2, 1) expected."""
        phi_expr = self.u_expr
        L = lame_expr(phi_expr, self.params)
        phi_f = vector_function(phi_expr)
        Lphi_f = vector_function([Li / self.rho0_expr for Li in L])
        rho0_f = field_function(self.rho0_expr)
        errors, labels = [], []
        for g, dt in zip(self.grids, self.settings.dt_list, strict=True):
            phi, Lphi = phi_f(g), Lphi_f(g)
            solver = LameSolver(g, self.params, rho0_f(g))
            n = int(round(T_END / dt))
            u = phi.copy()
            for k in range(n):
                f2 = -math.exp(-(k + 1) * dt) * (phi + Lphi)
                u = solver.step(u, f2, np.zeros(2), 0.0, dt)
            errors.append(float(np.max(np.abs(u - math.exp(-n * dt) * phi))))
            labels.append(f"{g.n_r}x{g.n_theta},dt={dt:g}")
        return _rows("lame-space-time", "space-time", labels, errors)

    # ===== Driver =====

    def run(self) -> list[OrderRow]:
        """Tabulate every study and enforce the order thresholds.

        Raises:
            OrderBelowThreshold: some finest-pair order is below its minimum,
                or the trapezoidal body update is not exact
        """
        table: list[OrderRow] = []
        for study in (
            self.lame_space,
            self.density_space,
            self.norms_space,
            self.flowmap_space,
            self.lame_time,
            lambda: self.lame_time(TimeScheme.CRANK_NICOLSON),
            self.flowmap_time,
            self.body_time,
            self.lame_space_time,
        ):
            rows = study()
            for row in rows:
                logger.info(
                    f"{row.study:<22} {row.kind:<10} {row.resolution:<18} "
                    f"err={row.error:.3e} order={row.order if row.order is None else round(row.order, 3)}"
                )
            table.extend(rows)

        failures = self.failures(table)
        if failures:
            raise OrderBelowThreshold(
                "; ".join(failures), table=[row.model_dump() for row in table]
            )
        return table

    def failures(self, table: list[OrderRow]) -> list[str]:
        s = self.settings
        minimum = {"space": s.spatial_order_min, "time": s.temporal_order_min,
                   "space-time": s.temporal_order_min}
        out = []
        studies = dict.fromkeys(row.study for row in table)
        for name in studies:
            rows = [row for row in table if row.study == name]
            kind = rows[-1].kind
            if kind == "exact":
                worst = max(row.error for row in rows)
                if worst > EXACTNESS_TOL:
                    out.append(f"{name}: error {worst:.3e} not exact")
                continue
            order = rows[-1].order
            if order is None or order < minimum[kind]:
                out.append(f"{name}: order {order} below {minimum[kind]}")
        return out


def convergence_study(config: RunConfig) -> list[OrderRow]:
    """Run every manufactured-solution study; see :class:`ConvergenceStudy`."""
    return ConvergenceStudy(config).run()
