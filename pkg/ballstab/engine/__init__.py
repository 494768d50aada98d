"""Engines - numerical core."""

from .cascade import LameSolver, cascade_step, density_step, lame_step, solve_body
from .controller import feedback_force, kp, validate
from .convergence import ConvergenceStudy, convergence_study
from .diagnostics import balance_residual, balance_series, discrete_norms, energy
from .forcing import evaluate_forcing
from .grid import Grid
from .initial_data import InitialData, compat_residuals, make_initial
from .marcher import LagrangianMarcher, run
from .piston import PistonOracle, piston_energy, piston_step

__all__ = [
    "Grid",
    "LameSolver",
    "cascade_step",
    "density_step",
    "lame_step",
    "solve_body",
    "feedback_force",
    "kp",
    "validate",
    "evaluate_forcing",
    "InitialData",
    "compat_residuals",
    "make_initial",
    "LagrangianMarcher",
    "run",
    "balance_residual",
    "balance_series",
    "discrete_norms",
    "energy",
    "ConvergenceStudy",
    "convergence_study",
    "PistonOracle",
    "piston_energy",
    "piston_step",
]
