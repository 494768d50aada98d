#!/usr/bin/env python3
"""
Picard contraction study over time steps.

Runs the configured scenario for a short horizon at each dt and writes
dt_sweep.csv with the maximum successive-iterate ratio, the largest Picard
iterate count and the iterate count of the last step.

Usage:
    python scripts/dt_sweep.py configs/default.cfg
    python scripts/dt_sweep.py configs/default.cfg --dts 4e-3 2e-3 1e-3 --horizon 0.2
    python scripts/dt_sweep.py configs/default.cfg --output-dir runs/sweep
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from ballstab.core.config import load_config  # noqa: E402
from ballstab.core.exceptions import BallStabException  # noqa: E402
from ballstab.engine.initial_data import make_initial  # noqa: E402
from ballstab.engine.marcher import LagrangianMarcher  # noqa: E402
from ballstab.storage import TrajectoryStore  # noqa: E402

DEFAULT_DTS = (4e-3, 2e-3, 1e-3)
DEFAULT_HORIZON = 0.2
DEFAULT_OUTPUT = "runs/dt_sweep"


def sweep(config_path: str, dts, horizon: float) -> list[dict]:
    base = load_config(config_path)
    rows = []
    for dt in dts:
        march = base.march.model_copy(update={"dt": dt, "T_final": horizon})
        output = base.output.model_copy(update={"snapshot_every": 0})
        config = base.model_copy(update={"march": march, "output": output})
        marcher = LagrangianMarcher(config)
        initial = make_initial(
            config.scenario.kind, config.physical, config.geometry, marcher.grid, config.scenario
        )
        trajectory = marcher.run(initial)
        rows.append(
            {
                "dt": dt,
                "max_contraction": max(r.contraction_max for r in trajectory.records),
                "max_picard_iters": max(r.picard_iters for r in trajectory.records),
                "last_picard_iters": trajectory.records[-1].picard_iters,
            }
        )
    return rows


def main() -> int:
    parser = argparse.ArgumentParser(description="Picard contraction versus dt")
    parser.add_argument("config", help="INI configuration file")
    parser.add_argument(
        "--dts", type=float, nargs="+", default=list(DEFAULT_DTS),
        help=f"Time steps to compare (default: {DEFAULT_DTS})",
    )
    parser.add_argument(
        "--horizon", type=float, default=DEFAULT_HORIZON,
        help=f"Simulated time per run (default: {DEFAULT_HORIZON})",
    )
    parser.add_argument(
        "--output-dir", default=DEFAULT_OUTPUT,
        help=f"Directory for dt_sweep.csv (default: {DEFAULT_OUTPUT})",
    )
    args = parser.parse_args()

    try:
        rows = sweep(args.config, args.dts, args.horizon)
    except BallStabException as exc:
        print(f"sweep failed: {exc}", file=sys.stderr)
        return exc.exit_code

    path = TrajectoryStore(args.output_dir).write_table("dt_sweep.csv", rows)
    print(f"{'dt':>10} {'max ratio':>10} {'max iters':>10} {'last iters':>10}")
    for row in rows:
        print(
            f"{row['dt']:>10.1e} {row['max_contraction']:>10.4f} "
            f"{row['max_picard_iters']:>10d} {row['last_picard_iters']:>10d}"
        )
    ordered = sorted(rows, key=lambda r: -r["dt"])
    for key in ("max_contraction", "last_picard_iters"):
        values = [r[key] for r in ordered]
        monotone = all(b <= a for a, b in zip(values, values[1:], strict=False))
        print(f"{key} non-increasing as dt decreases: {monotone}")
    print(f"Sweep table written to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
