"""
Direct assembly of the discrete two-scale system

Every macro tet of the scatterer carries its own copy of the matrix corrector
u1; every quadrature point of the second-order rule carries copies of u2 and
u3. The system grows with the product of macro and cell sizes, so it is only
assembled for small meshes, where it checks the decoupled realization.
"""
import logging
from typing import List, Optional, Tuple
import numpy as np
import scipy.sparse as sp
from src.config.settings import SolverSettings
from src.errors import GeometryError, SolverError
from src.fem.assembly import assemble_boundary_load, assemble_boundary_tangential_mass, assemble_curlcurl, assemble_mass
from src.fem.quadrature import TET_DEGREE_TWO
from src.fem.spaces import EdgeSpace, FieldFunction
from src.hmm.components import TwoScaleSolution
from src.linalg.solvers.direct import DirectSolver
from src.macro.components import ScatterConfig
from src.macro.incident import impedance_data
from src.mesh.components import StructuredTetMesh, PeriodicIdentification, TAG_INSIDE
from src.micro.cell_problems import build_cell_operators, cell3_matrix
from src.micro.components import CellOperators, MicroCoefficients

logger = logging.getLogger(__name__)


def _coupling(space: EdgeSpace, tets: np.ndarray, local: np.ndarray, offsets: np.ndarray,
              n_cols: int) -> sp.csr_matrix:
    """
    Scatter per-tet blocks (B, 6, w) into macro rows and consecutive column ranges

    Block b couples the six edge functions of macro tet tets[b] to columns
    offsets[b] .. offsets[b] + w.
    """
    position = space.tet_position[tets]
    rows = np.broadcast_to(space.dof_map[position][:, :, None], local.shape)
    cols = np.broadcast_to(offsets[:, None, None] + np.arange(local.shape[2])[None, None, :], local.shape)
    values = local * space.dof_sign[position][:, :, None]
    keep = rows >= 0
    return sp.coo_matrix((values[keep], (rows[keep], cols[keep])), shape=(space.n_dofs, n_cols)).tocsr()


def _saddle(block: sp.spmatrix, constraints: sp.spmatrix) -> sp.csr_matrix:
    return sp.bmat([[block, constraints], [constraints.T, None]]).tocsr()


def assemble_two_scale_system(
    config: ScatterConfig,
    mesh_G: StructuredTetMesh,
    operators: CellOperators,
) -> Tuple[sp.csr_matrix, np.ndarray, List[int]]:
    """
    The coupled system in u_H, the per-tet u1 and the per-point u2 and u3

    The u1 copies are fixed by Lagrange multipliers against the curl kernel, the
    u2 copies by one multiplier for their coefficient sum. Coefficients are
    constant per subdomain, so the cell integrals are the moment vectors of the
    cell operators.

    Args:
        config (ScatterConfig): Macro setup; its tensors are ignored
        mesh_G (StructuredTetMesh): Macro mesh resolving Omega
        operators (CellOperators): Cell matrices and moments

    Returns:
        Tuple[sp.csr_matrix, np.ndarray, List[int]]: Matrix, load and the sizes of the
            macro, u1, u2 and u3 unknown groups
    """
    if mesh_G.box != config.G:
        raise GeometryError("The mesh does not cover G")
    k = config.k
    ops = operators
    space = EdgeSpace(mesh_G)
    omega = np.flatnonzero(mesh_G.subdomain_tag == TAG_INSIDE)
    volumes = mesh_G.volumes[omega]
    rule = TET_DEGREE_TWO
    n_points = len(rule.normalized_weights)
    weights = (volumes[:, None] * rule.normalized_weights[None, :]).ravel()
    point_tets = np.repeat(omega, n_points)
    basis = space.values(rule.points)[space.tet_position[omega]].reshape(-1, 6, 3)

    curl_coeff = np.where(mesh_G.subdomain_tag == TAG_INSIDE, ops.eps0_integral, 1.0)
    macro = assemble_curlcurl(space, curl_coeff) - k * k * assemble_mass(space) \
        - 1j * k * assemble_boundary_tangential_mass(space)
    rows: List[List[Optional[sp.spmatrix]]] = [[macro]]
    sizes = [space.n_dofs]

    # u1: one copy per scatterer tet, constrained against the curl kernel
    n1 = ops.space1.n_dofs
    kernel = ops.kernel_basis
    stride1 = n1 + kernel.shape[1]
    local1 = volumes[:, None, None] * np.einsum("taj,jn->tan", space.curls[space.tet_position[omega]],
                                                ops.curl_moments)
    blocks1 = [_saddle(v * ops.curlcurl1, kernel) for v in volumes]
    groups = [(_coupling(space, omega, local1, stride1 * np.arange(len(omega)), stride1 * len(omega)),
               sp.block_diag(blocks1, format="csr"))]

    # u2: one copy per quadrature point, its coefficient sum fixed to zero
    n2 = ops.space2.n_dofs
    stride2 = n2 + 1
    ones = sp.csr_matrix(np.ones((n2, 1)))
    local2 = -k * k * weights[:, None, None] * np.einsum("pai,in->pan", basis, ops.gradient_moments)
    blocks2 = [_saddle(-k * k * w * ops.stiffness2, ones) for w in weights]
    groups.append((_coupling(space, point_tets, local2, stride2 * np.arange(len(weights)), stride2 * len(weights)),
                   sp.block_diag(blocks2, format="csr")))

    # u3: one copy per quadrature point on the inclusion
    n3 = ops.space3.n_dofs
    if n3:
        inclusion = cell3_matrix(ops, k)
        local3 = -k * k * weights[:, None, None] * np.einsum("pai,in->pan", basis, ops.value_moments)
        groups.append((_coupling(space, point_tets, local3, n3 * np.arange(len(weights)), n3 * len(weights)),
                       sp.block_diag([w * inclusion for w in weights], format="csr")))

    for index, (coupling, block) in enumerate(groups):
        rows[0].append(coupling)
        row: List[Optional[sp.spmatrix]] = [coupling.T] + [None] * len(groups)
        row[index + 1] = block
        rows.append(row)
        sizes.append(block.shape[0])

    matrix = sp.bmat(rows, format="csr")
    rhs = np.zeros(matrix.shape[0], dtype=complex)
    rhs[:space.n_dofs] = assemble_boundary_load(space, impedance_data(config.incident))
    logger.info("Two-scale system: %d unknowns (macro %d, u1 %d, u2 %d, u3 %d), nnz=%d", matrix.shape[0],
                space.n_dofs, sizes[1], sizes[2], sizes[3] if len(sizes) > 3 else 0, matrix.nnz)
    return matrix, rhs, sizes


def monolithic_solve(
    config: ScatterConfig,
    mesh_G: StructuredTetMesh,
    mesh_Y: StructuredTetMesh,
    identification: PeriodicIdentification,
    coefficients: MicroCoefficients,
    settings: Optional[SolverSettings] = None
) -> TwoScaleSolution:
    """
    Solve the two-scale system in one sparse factorization

    Returns:
        TwoScaleSolution: u_H and the corrector copies, in assembly order
    """
    ops = build_cell_operators(mesh_Y, identification, coefficients)
    matrix, rhs, sizes = assemble_two_scale_system(config, mesh_G, ops)
    x, report = DirectSolver(settings).solve(matrix, rhs)
    if not report.converged:
        logger.error("Two-scale solve residual %.3e", report.residual)
        raise SolverError(f"Two-scale solve residual {report.residual:.3e}")

    n_H, n_1, n_2 = sizes[0], sizes[1], sizes[2]
    omega = np.flatnonzero(mesh_G.subdomain_tag == TAG_INSIDE)
    n_points = len(omega) * len(TET_DEGREE_TWO.normalized_weights)
    stride1 = ops.space1.n_dofs + ops.kernel_basis.shape[1]
    u1 = x[n_H:n_H + n_1].reshape(len(omega), stride1)[:, :ops.space1.n_dofs]
    u2 = x[n_H + n_1:n_H + n_1 + n_2].reshape(n_points, ops.space2.n_dofs + 1)[:, :-1]
    n3 = ops.space3.n_dofs
    u3 = x[n_H + n_1 + n_2:].reshape(n_points, n3) if n3 else np.zeros((n_points, 0), dtype=complex)
    return TwoScaleSolution(
        u_H=FieldFunction(EdgeSpace(mesh_G), x[:n_H]),
        u1=u1,
        u2=u2,
        u3=u3,
        operators=ops,
        report=report,
    )
