"""Command-line entry point.

Usage:
    ballstab validate configs/default.cfg
    ballstab simulate configs/default.cfg --output-dir runs/default --snapshot-every 100
    ballstab piston configs/default.cfg
    ballstab convergence configs/default.cfg
    ballstab energy-report runs/default/trajectory.csv

Exit codes: 0 ok, 1 validation failure, 2 guard abort, 3 numerical failure.
"""

import argparse
import json
import sys
from pathlib import Path

from .core.config import RunConfig, load_config
from .core.exceptions import (
    BallStabException,
    ConfigValidationError,
    GuardViolation,
    InsufficientSnapshotsError,
    NumericalFailure,
    OrderBelowThreshold,
)
from .core.logger import get_logger, set_quiet
from .engine.convergence import convergence_study
from .engine.diagnostics import balance_series
from .engine.grid import Grid
from .engine.initial_data import make_initial
from .engine.marcher import LagrangianMarcher
from .engine.physics import body_mass_inertia, mean_density
from .engine.piston import PistonOracle
from .storage.trajectory_store import TrajectoryStore

logger = get_logger("cli")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_GUARD = 2
EXIT_NUMERICAL = 3


def parse_config(path: str | Path) -> RunConfig:
    """Load and fully validate a configuration file.

    Raises:
        ConfigValidationError: listing every violation
    """
    return load_config(path)


def _with_output(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates = {}
    if getattr(args, "output_dir", None):
        updates["output_dir"] = args.output_dir
    if getattr(args, "snapshot_every", None) is not None:
        updates["snapshot_every"] = args.snapshot_every
    if not updates:
        return config
    return config.model_copy(update={"output": config.output.model_copy(update=updates)})


def _report_violations(exc: ConfigValidationError) -> None:
    print(f"Configuration rejected ({len(exc.violations)} violation(s)):", file=sys.stderr)
    for v in exc.violations:
        print(f"  [{v.hypothesis}] {v.field}: {v.cited}", file=sys.stderr)


# ===== Subcommands =====

def cmd_validate(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    print(f"OK: {args.config} (scenario {config.scenario.kind.value})")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _with_output(parse_config(args.config), args)
    store = TrajectoryStore(config.output.output_dir, config)
    store.open()
    marcher = LagrangianMarcher(config, writer=store)
    initial = make_initial(
        config.scenario.kind, config.physical, config.geometry, marcher.grid, config.scenario
    )
    try:
        marcher.run(initial)
    except GuardViolation as exc:
        store.write_summary(marcher.summary("guard-abort", exc))
        print(json.dumps(exc.to_report().model_dump(), indent=2), file=sys.stderr)
        raise
    except NumericalFailure:
        store.write_summary(marcher.summary("numerical-failure"))
        raise
    summary = marcher.summary()
    store.write_summary(summary)
    print(
        f"Completed {summary.steps} steps to t={summary.t_final:g}: "
        f"|h-h1| {summary.h_error_initial:.3e} -> {summary.h_error_final:.3e}, "
        f"mass drift {summary.mass_drift:.2e}"
    )
    return EXIT_OK


def cmd_piston(args: argparse.Namespace) -> int:
    config = _with_output(parse_config(args.config), args)
    oracle = PistonOracle(config.physical, config.controller, config.piston)
    result = oracle.run()
    store = TrajectoryStore(Path(config.output.output_dir) / "piston")
    store.open()
    store.write_records(result.records)
    final = result.final
    print(
        f"Piston at t={final.t:g}: |h-h1|={abs(final.h - config.piston.h1):.3e} "
        f"(initial {abs(config.piston.h0 - config.piston.h1):.3e})"
    )
    return EXIT_OK


def cmd_convergence(args: argparse.Namespace) -> int:
    config = _with_output(parse_config(args.config), args)
    store = TrajectoryStore(config.output.output_dir)
    try:
        table = convergence_study(config)
    except OrderBelowThreshold as exc:
        store.write_table("convergence.csv", exc.table)
        raise
    path = store.write_table("convergence.csv", [row.model_dump() for row in table])
    for row in table:
        order = "-" if row.order is None else f"{row.order:.3f}"
        print(f"{row.study:<22} {row.kind:<10} {row.resolution:<22} {row.error:.3e}  {order}")
    print(f"Convergence table written to {path}")
    return EXIT_OK


def cmd_energy_report(args: argparse.Namespace) -> int:
    path = Path(args.trajectory)
    config = TrajectoryStore(path.parent).read_config()
    store = TrajectoryStore(path.parent, config)
    steps = store.snapshot_steps()
    if len(steps) < 3:
        raise InsufficientSnapshotsError(
            f"{path.parent} holds {len(steps)} snapshot(s); the energy report needs at least 3"
        )
    grid = Grid(config.grid.n_r, config.grid.n_theta, config.geometry.container_radius)
    rho0 = store.load_rho0()
    params = config.physical.model_copy(update={"rho_bar": mean_density(rho0, grid)})
    m, J = body_mass_inertia(params)

    states = [store.load_state(step, grid, rho0) for step in steps]
    series = balance_series(states, params, config.controller, grid, m, J)
    rows = [
        {
            "t": row.t,
            "residual": row.normalised,
            "E_total": row.E_total,
            "D_total": row.terms.dissipation,
            "rhs_ramp": row.terms.ramp,
            "rhs_cubic": row.terms.cubic,
            "rhs_transport": row.terms.transport,
            "rhs_cross": row.terms.cross,
        }
        for row in series
    ]
    out = store.write_table("energy_report.csv", rows)
    worst = max(row.normalised for row in series)
    print(f"max normalised balance residual {worst:.3e} over {len(rows)} levels -> {out}")
    return EXIT_OK


# ===== Parser =====

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", type=str, default=None, help="Run output directory")
    common.add_argument(
        "--snapshot-every", type=int, default=None, help="Snapshot cadence in steps (0 disables)"
    )
    common.add_argument("--quiet", action="store_true", help="Only warnings and errors")

    parser = argparse.ArgumentParser(
        prog="ballstab",
        description="Stabilisation of a rigid ball in a compressible viscous fluid",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, handler, help_text in (
        ("validate", cmd_validate, "Check a configuration against every hypothesis"),
        ("simulate", cmd_simulate, "Run the 2D fluid-body simulation"),
        ("piston", cmd_piston, "Run the 1D piston oracle"),
        ("convergence", cmd_convergence, "Manufactured-solution order study"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("config", help="INI configuration file")
        p.set_defaults(handler=handler)

    p = sub.add_parser(
        "energy-report", parents=[common], help="Energy-balance residuals from snapshots"
    )
    p.add_argument("trajectory", help="trajectory.csv of a finished run")
    p.set_defaults(handler=cmd_energy_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.quiet:
        set_quiet()
    try:
        return args.handler(args)
    except ConfigValidationError as exc:
        _report_violations(exc)
        return EXIT_INVALID
    except GuardViolation as exc:
        logger.error(f"Guard abort ({exc.guard}) at t={exc.t:.6g}: {exc}")
        return EXIT_GUARD
    except NumericalFailure as exc:
        logger.error(f"Numerical failure: {exc}")
        return EXIT_NUMERICAL
    except BallStabException as exc:
        logger.error(str(exc))
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
