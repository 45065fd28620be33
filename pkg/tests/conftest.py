import pytest
from src.config.settings import SolverSettings
from src.macro.components import ScatterConfig
from src.macro.incident import incident_plane_wave
from src.mesh.builder import build_box_mesh, build_periodic_cell_mesh
from src.mesh.components import UNIT_CELL
from src.micro.components import MicroCoefficients
from tests.helpers import CENTER_BOX


@pytest.fixture
def solver_settings():
    return SolverSettings(cg_tol=1e-12)


@pytest.fixture
def coefficients():
    return MicroCoefficients(eps0_inv=1.0, eps1_inv=1.0 - 0.01j)


@pytest.fixture(scope="session")
def cell_mesh():
    """4^3 cell with the inclusion (0.25, 0.75)^3"""
    return build_periodic_cell_mesh(4, CENTER_BOX)


@pytest.fixture(scope="session")
def unit_mesh():
    return build_box_mesh(UNIT_CELL, 2)


@pytest.fixture
def scatter_config():
    """Unit box G with the scatterer (0.25, 0.75)^3 at k = 4"""
    return ScatterConfig(G=UNIT_CELL, Omega=CENTER_BOX, k=4.0, incident=incident_plane_wave(4.0))
