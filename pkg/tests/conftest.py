"""Shared fixtures for the ballstab test suite."""

from pathlib import Path

import numpy as np
import pytest

from ballstab.core.config import (
    ControllerParams,
    Geometry,
    GridConfig,
    MarchConfig,
    OutputConfig,
    PhysicalParams,
    RunConfig,
)
from ballstab.engine.grid import Grid
from ballstab.engine.kinematics import identity_flowmap
from ballstab.models.state import BodyState, FluidState, SimulationState

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run long acceptance tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def config_dir() -> Path:
    return CONFIG_DIR


@pytest.fixture
def params() -> PhysicalParams:
    return PhysicalParams()


@pytest.fixture
def controller() -> ControllerParams:
    return ControllerParams()


@pytest.fixture(scope="session")
def grid() -> Grid:
    """Reference 33x64 grid on R = 3."""
    return Grid(33, 64, 3.0)


@pytest.fixture(scope="session")
def coarse_grid() -> Grid:
    return Grid(17, 32, 3.0)


@pytest.fixture
def small_config() -> RunConfig:
    """Displaced-rest run on the coarse grid for a few steps, no snapshots."""
    return RunConfig(
        grid=GridConfig(n_r=17, n_theta=32),
        march=MarchConfig(dt=1e-3, T_final=0.01),
        output=OutputConfig(snapshot_every=0),
    )


@pytest.fixture
def equilibrium_config(small_config) -> RunConfig:
    return small_config.model_copy(update={"geometry": Geometry(h1=(0.0, 0.0))})


def rest_state(grid: Grid, h_tilde=(0.0, 0.0), t: float = 0.0, rho_tilde: float = 0.0):
    """Fluid at rest with uniform density, identity map, body at h1 + h_tilde."""
    fluid = FluidState(
        rho_tilde=np.full(grid.shape, rho_tilde), u_tilde=np.zeros((2,) + grid.shape), t=t
    )
    body = BodyState.at_rest(np.asarray(h_tilde, dtype=float))
    return SimulationState(
        fluid=fluid, body=body, flowmap=identity_flowmap(grid), rho0=np.ones(grid.shape)
    )


def write_cfg(path: Path, text: str) -> Path:
    path.write_text(text)
    return path
