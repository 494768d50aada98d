"""Trajectory Store - CSV records, binary field snapshots and run summaries.

Directory layout:
    trajectory.csv                  one row per step, frozen header
    snap_<step>_<field>.big         field snapshots (rho_tilde, u_x, u_y, X_x, X_y, body)
    rho0.big                        initial density (needed to rebuild forcing)
    config.json                     effective run configuration
    summary.json                    RunSummary
"""

import csv
import json
import re
from pathlib import Path
from typing import Any, Protocol

import numpy as np

from ..core.config import RunConfig
from ..core.exceptions import BallStabException
from ..core.logger import get_logger
from ..engine.grid import Grid
from ..engine.kinematics import build_flowmap
from ..models.schemas import RunSummary
from ..models.state import BodyState, FluidState, SimulationState

logger = get_logger("storage")

CSV_HEADER = (
    "t", "h_x", "h_y", "ell_x", "ell_y", "omega",
    "E_total", "E_kin", "E_compress", "E_body", "E_spring",
    "D_visc", "D_damp", "mass",
    "picard_iters", "contraction_max", "distortion",
)
SNAPSHOT_FIELDS = ("rho_tilde", "u_x", "u_y", "X_x", "X_y", "body")
HEADER_BYTES = 64
MAGIC = "BIG1"

_HEADER_RE = re.compile(r"^BIG1 nr=(\d+) nt=(\d+) t=(\S+)\s*$")
_SNAP_RE = re.compile(r"^snap_(\d+)_rho_tilde\.big$")


class SnapshotFormatError(BallStabException):
    """Snapshot file with a malformed header or payload."""


class Row(Protocol):
    def to_row(self) -> dict[str, Any]: ...


def format_value(value: Any) -> str:
    """Deterministic text for CSV cells: repr for floats, str for ints."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return format_value(value)


# ===== Binary snapshots =====

def write_big(path: str | Path, array: np.ndarray, t: float) -> None:
    """Write a 2D array as BIG1: 64-byte ASCII header + little-endian float64, row-major."""
    data = np.asarray(array, dtype=float)
    if data.ndim != 2:
        raise SnapshotFormatError(f"snapshot arrays must be 2D, got shape {data.shape}")
    header = f"{MAGIC} nr={data.shape[0]} nt={data.shape[1]} t={float(t)!r}"
    if len(header) > HEADER_BYTES:
        raise SnapshotFormatError(f"snapshot header too long: {header!r}")
    with open(path, "wb") as fh:
        fh.write(header.ljust(HEADER_BYTES).encode("ascii"))
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes(order="C"))


def read_big(path: str | Path) -> tuple[np.ndarray, float]:
    """Read a BIG1 file; returns (array, t).

    Raises:
        SnapshotFormatError: bad magic, header or payload size
    """
    raw = Path(path).read_bytes()
    match = _HEADER_RE.match(raw[:HEADER_BYTES].decode("ascii", errors="replace"))
    if match is None:
        raise SnapshotFormatError(f"{path}: not a BIG1 snapshot")
    nr, nt, t = int(match.group(1)), int(match.group(2)), float(match.group(3))
    payload = raw[HEADER_BYTES:]
    if len(payload) != 8 * nr * nt:
        raise SnapshotFormatError(f"{path}: expected {8 * nr * nt} payload bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f8").reshape(nr, nt).astype(float), t


class TrajectoryStore:
    """File-backed writer for one run directory.

    Implements the marcher's writer interface (``write_record``,
    ``write_snapshot``) and reads snapshots back for energy reports.

    Example:
        >>> store = TrajectoryStore("runs/default", config)
        >>> store.open()
        >>> LagrangianMarcher(config, writer=store).run(initial)
        >>> store.write_summary(summary)
    """

    TRAJECTORY = "trajectory.csv"
    SUMMARY = "summary.json"
    CONFIG = "config.json"
    RHO0 = "rho0.big"

    def __init__(self, output_dir: str | Path, config: RunConfig | None = None, h1=None):
        self.root = Path(output_dir)
        self.config = config
        self.h1 = np.asarray(
            h1 if h1 is not None else (config.geometry.h1 if config else (0.0, 0.0)), dtype=float
        )
        self._rows = 0

    # ===== Paths =====

    @property
    def trajectory_path(self) -> Path:
        return self.root / self.TRAJECTORY

    def snapshot_path(self, step: int, field: str) -> Path:
        return self.root / f"snap_{step:08d}_{field}.big"

    # ===== Writing =====

    def open(self) -> None:
        """Create the directory and start a fresh CSV with the header."""
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.trajectory_path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(CSV_HEADER)
        self._rows = 0
        if self.config is not None:
            (self.root / self.CONFIG).write_text(
                self.config.model_dump_json(indent=2, by_alias=True)
            )
        logger.debug(f"Opened trajectory store at {self.root}")

    def write_record(self, record: Row) -> None:
        row = record.to_row()
        with open(self.trajectory_path, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(
                [format_value(row[key]) for key in CSV_HEADER]
            )
        self._rows += 1

    def write_records(self, records) -> None:
        rows = [[format_value(r.to_row()[key]) for key in CSV_HEADER] for r in records]
        with open(self.trajectory_path, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
        self._rows += len(rows)

    def write_snapshot(self, state: SimulationState) -> None:
        t, step = state.t, state.step
        if step == 0:
            write_big(self.root / self.RHO0, state.rho0, t)
        u, X = state.fluid.u_tilde, state.flowmap.X
        fields = {
            "rho_tilde": state.fluid.rho_tilde,
            "u_x": u[0],
            "u_y": u[1],
            "X_x": X[0],
            "X_y": X[1],
        }
        for name, values in fields.items():
            write_big(self.snapshot_path(step, name), values, t)
        b = state.body
        h = b.position(self.h1)
        body = np.array([[h[0], h[1], *b.ell_tilde, b.omega_tilde, b.theta_q, t, float(step)]])
        write_big(self.snapshot_path(step, "body"), body, t)
        logger.debug(f"Snapshot written for step {step} (t={t:.6g})")

    def write_summary(self, summary: RunSummary) -> Path:
        path = self.root / self.SUMMARY
        path.write_text(summary.model_dump_json(indent=2))
        return path

    def write_table(self, name: str, rows: list[dict[str, Any]]) -> Path:
        """Write a list of flat dicts as CSV (energy report, convergence table)."""
        path = self.root / name
        self.root.mkdir(parents=True, exist_ok=True)
        columns = list(rows[0].keys()) if rows else []
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row[c]) for c in columns])
        return path

    # ===== Reading =====

    def read_trajectory(self) -> list[dict[str, float]]:
        with open(self.trajectory_path, newline="") as fh:
            reader = csv.DictReader(fh)
            return [{k: float(v) for k, v in row.items()} for row in reader]

    def read_config(self) -> RunConfig:
        data = json.loads((self.root / self.CONFIG).read_text())
        return RunConfig.model_validate(data)

    def snapshot_steps(self) -> list[int]:
        steps = []
        for path in self.root.glob("snap_*_rho_tilde.big"):
            match = _SNAP_RE.match(path.name)
            if match:
                steps.append(int(match.group(1)))
        return sorted(steps)

    def load_fields(self, step: int) -> dict[str, np.ndarray]:
        return {name: read_big(self.snapshot_path(step, name))[0] for name in SNAPSHOT_FIELDS}

    def load_rho0(self) -> np.ndarray:
        return read_big(self.root / self.RHO0)[0]

    def load_state(self, step: int, grid: Grid, rho0: np.ndarray | None = None) -> SimulationState:
        """Rebuild a SimulationState from its snapshot files."""
        f = self.load_fields(step)
        body_row = f["body"][0]
        t = float(body_row[6])
        disp = np.stack([f["X_x"], f["X_y"]]) - grid.y
        flowmap = build_flowmap(disp, np.zeros_like(disp), grid, t=t)
        fluid = FluidState(rho_tilde=f["rho_tilde"], u_tilde=np.stack([f["u_x"], f["u_y"]]), t=t)
        body = BodyState(
            h_tilde=body_row[0:2] - self.h1,
            ell_tilde=body_row[2:4].copy(),
            omega_tilde=float(body_row[4]),
            theta_q=float(body_row[5]),
        )
        return SimulationState(
            fluid=fluid,
            body=body,
            flowmap=flowmap,
            rho0=self.load_rho0() if rho0 is None else rho0,
            step=int(body_row[7]),
        )
