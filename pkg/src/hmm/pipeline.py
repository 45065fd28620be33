import logging
from pathlib import Path
from typing import Optional
from src.config.settings import SolverSettings
from src.hmm.components import HmmSolution
from src.macro.components import ScatterConfig
from src.macro.scatter import solve_effective
from src.mesh.components import StructuredTetMesh, PeriodicIdentification
from src.micro.cell_problems import compute_mu_hom, solve_cells
from src.micro.components import MicroCoefficients

logger = logging.getLogger(__name__)


def hmm_solve(
    config: ScatterConfig,
    mesh_G: StructuredTetMesh,
    mesh_Y: StructuredTetMesh,
    identification: PeriodicIdentification,
    coefficients: MicroCoefficients,
    k: Optional[float] = None,
    settings: Optional[SolverSettings] = None,
    dump_dir: Optional[Path] = None
) -> HmmSolution:
    """
    Heterogeneous multiscale solve with constant micro coefficients

    The cell problems are solved once on the cell mesh, their discrete effective
    tensors enter the macro system, and the correctors follow from u_H. For
    coefficients constant per subdomain this equals solving the coupled
    two-scale system directly.

    Args:
        config (ScatterConfig): Macro setup; its tensors are replaced
        mesh_G (StructuredTetMesh): Macro mesh resolving Omega
        mesh_Y (StructuredTetMesh): Periodic cell mesh resolving the inclusion
        identification (PeriodicIdentification): Wrap maps of the cell mesh
        coefficients (MicroCoefficients): Cell coefficients
        k (Optional[float]): Wavenumber; defaults to config.k
        settings (Optional[SolverSettings]): Linear solver parameters
        dump_dir (Optional[Path]): Write the macro matrix here

    Returns:
        HmmSolution: Macro solution, cell solutions and effective tensors
    """
    k = config.k if k is None else k
    config = config.at_wavenumber(k)
    cells = solve_cells(mesh_Y, identification, coefficients, k, settings)
    tensors = compute_mu_hom(cells, k)
    logger.info("HMM tensors at k=%g: mu_hom diagonal %s", k, tensors.mu_hom.diagonal())
    config = config.with_tensors(tensors)
    macro = solve_effective(config, mesh_G, settings, dump_dir)
    logger.info("HMM solve done: macro n=%d, micro n=%d", mesh_G.n_per_axis, mesh_Y.n_per_axis)
    return HmmSolution(macro=macro, cells=cells, tensors=tensors, config=config)
