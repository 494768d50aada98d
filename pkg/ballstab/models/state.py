"""State containers for the fluid, the body and the flow map."""

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np


def rotation_matrix(angle: float) -> np.ndarray:
    """2D rotation by ``angle`` (counter-clockwise)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class FluidState:
    """Lagrangian fluid unknowns on the reference grid.

    Attributes:
        rho_tilde: Density perturbation rho o X - rho_bar, shape (n_r, n_theta)
        u_tilde: Body-frame velocity Q^T u o X, Cartesian components, shape (2, n_r, n_theta)
        t: Time of the state
    """

    rho_tilde: np.ndarray
    u_tilde: np.ndarray
    t: float = 0.0

    def density(self, rho_bar: float) -> np.ndarray:
        return self.rho_tilde + rho_bar

    def with_time(self, t: float) -> "FluidState":
        return replace(self, t=t)


@dataclass(frozen=True)
class BodyState:
    """Body unknowns in the transformed frame.

    Attributes:
        h_tilde: h - h1
        ell_tilde: Q^T ell
        omega_tilde: Angular velocity (scalar in 2D)
        theta_q: Rotation angle of Q
    """

    h_tilde: np.ndarray
    ell_tilde: np.ndarray
    omega_tilde: float = 0.0
    theta_q: float = 0.0

    @property
    def Q(self) -> np.ndarray:
        return rotation_matrix(self.theta_q)

    def position(self, h1: np.ndarray) -> np.ndarray:
        """Physical body centre h = h_tilde + h1."""
        return self.h_tilde + np.asarray(h1, dtype=float)

    def velocity(self) -> np.ndarray:
        """Physical linear velocity ell = Q ell_tilde."""
        return self.Q @ self.ell_tilde

    def to_array(self) -> np.ndarray:
        return np.array(
            [*self.h_tilde, *self.ell_tilde, self.omega_tilde, self.theta_q], dtype=float
        )

    @classmethod
    def at_rest(cls, h_tilde: np.ndarray) -> "BodyState":
        return cls(h_tilde=np.asarray(h_tilde, dtype=float).copy(), ell_tilde=np.zeros(2))


@dataclass(frozen=True)
class FlowMapState:
    """Sampled flow map X(t, .) and its derived node-wise algebra.

    Attributes:
        disp: X - y, shape (2, n_r, n_theta)
        X: Current positions relative to h0
        gradX: gradX[a, b] = dX_a/dy_b
        gradY: (grad X)^-1 per node, i.e. grad Y evaluated at X
        d2Y: d2Y[l, p, i] = d^2 Y_l / dx_p dx_i at X
        detJ: det grad X
        velocity: Q u_tilde of the time level the map belongs to (trapezoid memory)
    """

    disp: np.ndarray
    X: np.ndarray
    gradX: np.ndarray
    gradY: np.ndarray
    d2Y: np.ndarray
    detJ: np.ndarray
    velocity: np.ndarray

    def distortion(self) -> float:
        """max over nodes of the entrywise max |grad X - I|."""
        eye = np.eye(2)[:, :, None, None]
        return float(np.max(np.abs(self.gradX - eye)))


@dataclass(frozen=True)
class SimulationState:
    """Everything the marcher carries from one time level to the next."""

    fluid: FluidState
    body: BodyState
    flowmap: FlowMapState
    rho0: np.ndarray
    step: int = 0

    @property
    def t(self) -> float:
        return self.fluid.t


@dataclass(frozen=True)
class EnergyReport:
    """Energy components and dissipation rates, all divided by rho_bar."""

    t: float
    E_kin: float
    E_compress: float
    E_body: float
    E_spring: float
    D_visc_shear: float
    D_visc_bulk: float
    D_damp: float
    mass: float

    @property
    def E_total(self) -> float:
        return self.E_kin + self.E_compress + self.E_body + self.E_spring

    @property
    def D_visc(self) -> float:
        return self.D_visc_shear + self.D_visc_bulk

    @property
    def D_total(self) -> float:
        return self.D_visc + self.D_damp

    def to_dict(self) -> dict[str, float]:
        return {
            "t": self.t,
            "E_total": self.E_total,
            "E_kin": self.E_kin,
            "E_compress": self.E_compress,
            "E_body": self.E_body,
            "E_spring": self.E_spring,
            "D_visc": self.D_visc,
            "D_damp": self.D_damp,
            "mass": self.mass,
        }


@dataclass
class TrajectoryRecord:
    """Per-step diagnostics emitted by the marcher."""

    t: float
    h: np.ndarray
    ell: np.ndarray
    omega: float
    energy: EnergyReport
    picard_iters: int = 0
    contraction_max: float = 0.0
    distortion: float = 0.0
    u_h2: float = 0.0
    rho_h2: float = 0.0
    margins: dict[str, float] = field(default_factory=dict)

    def to_row(self) -> dict[str, Any]:
        e = self.energy
        return {
            "t": self.t,
            "h_x": float(self.h[0]),
            "h_y": float(self.h[1]),
            "ell_x": float(self.ell[0]),
            "ell_y": float(self.ell[1]),
            "omega": float(self.omega),
            "E_total": e.E_total,
            "E_kin": e.E_kin,
            "E_compress": e.E_compress,
            "E_body": e.E_body,
            "E_spring": e.E_spring,
            "D_visc": e.D_visc,
            "D_damp": e.D_damp,
            "mass": e.mass,
            "picard_iters": self.picard_iters,
            "contraction_max": self.contraction_max,
            "distortion": self.distortion,
        }


@dataclass
class Trajectory:
    """Ordered records plus optional field snapshots keyed by step."""

    records: list[TrajectoryRecord] = field(default_factory=list)
    snapshots: dict[int, SimulationState] = field(default_factory=dict)

    def append(self, record: TrajectoryRecord) -> None:
        if self.records and record.t <= self.records[-1].t:
            raise ValueError(
                f"trajectory times must increase: {record.t} after {self.records[-1].t}"
            )
        self.records.append(record)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def __len__(self) -> int:
        return len(self.records)
