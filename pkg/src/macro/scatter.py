import logging
from pathlib import Path
from typing import Callable, Optional, Tuple, Union
import numpy as np
import scipy.sparse as sp
from src.config.settings import SolverSettings
from src.errors import GeometryError, SolverError
from src.fem.assembly import (
    assemble_boundary_load, assemble_boundary_tangential_mass, assemble_curlcurl, assemble_mass
)
from src.fem.spaces import EdgeSpace, FieldFunction
from src.linalg.components import dump_matrix_market
from src.linalg.factory import SolverFactory
from src.macro.components import EnergyBalance, MacroSolution, PlaneSlice, ScatterConfig
from src.macro.incident import impedance_data
from src.mesh.builder import build_box_mesh
from src.mesh.components import StructuredTetMesh, TAG_INSIDE
from src.micro.components import EffectiveTensors

logger = logging.getLogger(__name__)

RESIDUAL_LIMIT = 1e-8
ENERGY_LIMIT = 1e-8


def build_scatter_mesh(config: ScatterConfig, n: int) -> StructuredTetMesh:
    """Box mesh of G resolving Omega"""
    return build_box_mesh(config.G, n, config.Omega)


def region_tensors(mesh: StructuredTetMesh, inside: np.ndarray) -> np.ndarray:
    """Per-tet tensors: `inside` in Omega, the identity elsewhere"""
    tensors = np.broadcast_to(np.eye(3, dtype=np.result_type(inside, float)), (mesh.n_tets, 3, 3)).copy()
    tensors[mesh.subdomain_tag == TAG_INSIDE] = inside
    return tensors


def _effective_parts(
    config: ScatterConfig,
    mesh: StructuredTetMesh,
    space: EdgeSpace
) -> Tuple[sp.spmatrix, sp.spmatrix, sp.spmatrix]:
    """Curl-curl, mu-mass and boundary tangential mass matrices of the effective problem"""
    if mesh.box != config.G:
        raise GeometryError("The mesh does not cover G")
    tensors = config.tensors or EffectiveTensors.identity(config.k)
    curlcurl = assemble_curlcurl(space, region_tensors(mesh, tensors.eps_inv_hom))
    mass = assemble_mass(space, region_tensors(mesh, tensors.mu_hom))
    return curlcurl, mass, assemble_boundary_tangential_mass(space)


def assemble_effective_system(
    config: ScatterConfig,
    mesh: StructuredTetMesh,
    space: Optional[EdgeSpace] = None
) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    System curlcurl(eps_inv) - k^2 mass(mu) - i k boundary_mass and the impedance load

    Args:
        config (ScatterConfig): Setup; tensors default to the identity
        mesh (StructuredTetMesh): Mesh of G resolving Omega
        space (Optional[EdgeSpace]): Unconstrained edge space on the mesh

    Returns:
        Tuple[sp.csr_matrix, np.ndarray]: Complex symmetric matrix and load vector
    """
    space = space or EdgeSpace(mesh)
    return _combine(config, space, _effective_parts(config, mesh, space))


def _combine(config: ScatterConfig, space: EdgeSpace, parts) -> Tuple[sp.csr_matrix, np.ndarray]:
    curlcurl, mass, boundary = parts
    k = config.k
    matrix = curlcurl - k * k * mass - 1j * k * boundary
    rhs = assemble_boundary_load(space, impedance_data(config.incident))
    logger.info("Effective system: %d dofs, nnz=%d", space.n_dofs, matrix.nnz)
    return matrix.tocsr(), rhs


def energy_balance(
    config: ScatterConfig,
    mesh: StructuredTetMesh,
    u: np.ndarray,
    rhs: np.ndarray,
    space: Optional[EdgeSpace] = None
) -> EnergyBalance:
    """
    Split Im(u^H A u) into curl-curl loss, absorption in Omega and impedance loss

    Each part comes from its own assembled matrix, so a wrong sign or a missing
    term in the system shows up as a defect against Im(u^H b).
    """
    parts = _effective_parts(config, mesh, space or EdgeSpace(mesh))
    return _split_balance(config.k, parts, u, rhs)


def _split_balance(k: float, parts, u: np.ndarray, rhs: np.ndarray) -> EnergyBalance:
    curlcurl, mass, boundary = parts
    return EnergyBalance(
        curl_loss=float(np.vdot(u, curlcurl @ u).imag),
        absorption=float(-k * k * np.vdot(u, mass @ u).imag),
        impedance_loss=float(-k * np.vdot(u, boundary @ u).real),
        flux=float(np.vdot(u, rhs).imag),
    )


def solve_effective(
    config: ScatterConfig,
    mesh: StructuredTetMesh,
    settings: Optional[SolverSettings] = None,
    dump_dir: Optional[Path] = None
) -> MacroSolution:
    """
    Solve the effective scattering problem

    The imaginary part of u^H A u, split into curl-curl loss, absorption in
    Omega and impedance loss, must reproduce that of u^H b; the split and its
    relative defect are recorded on the solution.

    Raises:
        SolverError: The solve residual exceeds the admissible limit
    """
    space = EdgeSpace(mesh)
    parts = _effective_parts(config, mesh, space)
    matrix, rhs = _combine(config, space, parts)
    if dump_dir is not None:
        dump_matrix_market(matrix, Path(dump_dir) / f"effective_n{mesh.n_per_axis}_k{config.k:g}",
                           comment=f"effective system, n={mesh.n_per_axis}, k={config.k:g}")
    solver = SolverFactory.create(settings or SolverSettings())
    u, report = solver.solve(matrix, rhs)
    if report.residual > RESIDUAL_LIMIT:
        logger.error("Effective solve residual %.3e above %.1e", report.residual, RESIDUAL_LIMIT)
        raise SolverError(f"Effective solve residual {report.residual:.3e} above {RESIDUAL_LIMIT:.1e}")

    energy = _split_balance(config.k, parts, u, rhs)
    logger.debug("Energy balance: curl %.6e, absorption %.6e, impedance %.6e, flux %.6e",
                 energy.curl_loss, energy.absorption, energy.impedance_loss, energy.flux)
    if energy.defect > ENERGY_LIMIT:
        logger.warning("Energy balance defect %.3e above %.1e", energy.defect, ENERGY_LIMIT)
    return MacroSolution(
        u_H=FieldFunction(space, u),
        k=config.k,
        mesh=mesh,
        report=report,
        energy_defect=energy.defect,
        tensors=config.tensors,
        energy=energy,
    )


def plane_slice(
    field: Union[FieldFunction, Callable[[np.ndarray], np.ndarray]],
    box,
    axis: int,
    offset: float,
    resolution: int
) -> PlaneSlice:
    """
    Sample a field on the plane x_axis = offset at the barycenters of a resolution^2 grid of cells

    Args:
        field: Discrete field or callable on (N, 3) points
        box (AxisBox): Box spanned by the plane's two remaining axes
        axis (int): Normal axis of the plane
        offset (float): Plane position along the axis
        resolution (int): Cells per in-plane axis

    Returns:
        PlaneSlice: In-plane coordinates s, t and complex vector samples
    """
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
    if not box.lo[axis] <= offset <= box.hi[axis]:
        raise GeometryError(f"Plane offset {offset} is outside the box")
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    a, b = [i for i in range(3) if i != axis]
    s = box.lo[a] + (np.arange(resolution) + 0.5) * (box.hi[a] - box.lo[a]) / resolution
    t = box.lo[b] + (np.arange(resolution) + 0.5) * (box.hi[b] - box.lo[b]) / resolution
    ss, tt = np.meshgrid(s, t, indexing="ij")
    points = np.zeros((ss.size, 3))
    points[:, axis] = offset
    points[:, a] = ss.ravel()
    points[:, b] = tt.ravel()
    evaluate = field.evaluate if isinstance(field, FieldFunction) else field
    return PlaneSlice(axis=axis, offset=float(offset), s=ss.ravel(), t=tt.ravel(),
                      values=np.asarray(evaluate(points), dtype=complex))
