import logging
from typing import List, Optional
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from src.config.settings import SolverSettings
from src.errors import ResonanceError, SingularMatrixError, SolverError
from src.fem.assembly import (
    assemble_constant_curl_load, assemble_constant_load, assemble_curlcurl, assemble_mass,
    assemble_p1_field_load, assemble_p1_load, assemble_p1_stiffness, discrete_gradient, tensor_coefficients
)
from src.fem.interpolation import interpolate_edge
from src.fem.spaces import EdgeSpace, FieldFunction, NodalSpace
from src.linalg.factory import SolverFactory
from src.linalg.solvers.krylov import cg_projected
from src.mesh.components import StructuredTetMesh, PeriodicIdentification, TAG_INSIDE, TAG_OUTSIDE
from src.micro.components import (
    CellOperators, CellSolutions, Cell1Solution, Cell2Solution, Cell3Solution, EffectiveTensors, MicroCoefficients
)

logger = logging.getLogger(__name__)

UNIT_VECTORS = np.eye(3)


def _constant_field(direction: np.ndarray):
    return lambda points: np.broadcast_to(direction, points.shape)


def build_cell_operators(
    mesh: StructuredTetMesh,
    identification: PeriodicIdentification,
    coefficients: MicroCoefficients
) -> CellOperators:
    """
    Assemble everything the three cell problems share

    Args:
        mesh (StructuredTetMesh): Periodic cell mesh with inclusion tags
        identification (PeriodicIdentification): Its periodic wrap maps
        coefficients (MicroCoefficients): eps0_inv on the matrix, eps1_inv on the inclusion

    Returns:
        CellOperators: Spaces, matrices and moment vectors
    """
    eps0 = coefficients.eps0_inv
    space1 = EdgeSpace(mesh, "periodic_quotient", TAG_OUTSIDE, identification)
    curlcurl1 = assemble_curlcurl(space1, eps0)
    curl_moments = np.stack([assemble_constant_curl_load(space1, e, eps0) for e in UNIT_VECTORS]).real

    # gradients of periodic potentials and the three constant fields span the curl kernel
    nodal1 = NodalSpace(mesh, "periodic_zero_mean", TAG_OUTSIDE, identification)
    gradients = discrete_gradient(nodal1, space1)[:, 1:]
    harmonic = np.stack([interpolate_edge(space1, _constant_field(e)).coefficients for e in UNIT_VECTORS],
                        axis=1)
    kernel_basis = sp.hstack([gradients, sp.csr_matrix(harmonic)]).tocsr()

    space2 = NodalSpace(mesh, "periodic_zero_mean", TAG_OUTSIDE, identification)
    stiffness2 = assemble_p1_stiffness(space2)
    gradient_moments = np.stack([assemble_p1_load(space2, e) for e in UNIT_VECTORS])

    space3 = EdgeSpace(mesh, "zero_tangential_trace", TAG_INSIDE)
    curlcurl3 = assemble_curlcurl(space3)
    mass3 = assemble_mass(space3)
    value_moments = np.stack([assemble_constant_load(space3, e) for e in UNIT_VECTORS])

    eps0_integral = float(np.sum(tensor_coefficients(space1, eps0)[:, 0, 0] * space1.volumes))
    logger.info("Cell operators: %d matrix edge dofs, %d nodal dofs, %d inclusion edge dofs",
                space1.n_dofs, space2.n_dofs, space3.n_dofs)
    return CellOperators(
        mesh=mesh,
        identification=identification,
        coefficients=coefficients,
        space1=space1,
        curlcurl1=curlcurl1,
        curl_moments=curl_moments,
        kernel_basis=kernel_basis,
        space2=space2,
        stiffness2=stiffness2,
        gradient_moments=gradient_moments,
        space3=space3,
        curlcurl3=curlcurl3,
        mass3=mass3,
        value_moments=value_moments,
        eps0_integral=eps0_integral,
    )


class CurlKernelProjector:
    """
    Euclidean projection onto the complement of span{gradients, harmonic fields}

    The gradient part uses a sparse factorization of G^T G; the three harmonic
    columns are orthogonalized against the gradients once.
    """

    def __init__(self, gradients: sp.csr_matrix, harmonic: np.ndarray):
        self.gradients = gradients
        self._lu = spla.splu(sp.csc_matrix(gradients.T @ gradients)) if gradients.shape[1] else None
        h = self._remove_gradients(harmonic)
        self.harmonic = h
        self._gram = np.linalg.inv(h.T @ h)

    def _remove_gradients(self, x: np.ndarray) -> np.ndarray:
        if self._lu is None:
            return x
        return x - self.gradients @ self._lu.solve(np.asarray(self.gradients.T @ x))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = self._remove_gradients(x)
        return x - self.harmonic @ (self._gram @ (self.harmonic.T @ x))


def _load_scale(volumes: np.ndarray, local: np.ndarray) -> float:
    """Norm of the unsummed element contributions, a floor for round-off level loads"""
    return float(np.sqrt(np.sum((volumes[:, None] * np.linalg.norm(local, axis=2)) ** 2)))


def solve_cell1(
    mesh: StructuredTetMesh,
    identification: PeriodicIdentification,
    coefficients: MicroCoefficients,
    settings: Optional[SolverSettings] = None,
    operators: Optional[CellOperators] = None
) -> Cell1Solution:
    """
    Matrix correctors w1_l and the effective inverse permittivity

    The curl-curl system on the periodic matrix space is singular with a known
    kernel, so it is solved by projected conjugate gradients. Only the curls of
    the correctors enter the tensor, so the gauge does not matter.

    Returns:
        Cell1Solution: The correctors, their per-tet curls and eps_inv_hom
    """
    settings = settings or SolverSettings()
    ops = operators or build_cell_operators(mesh, identification, coefficients)
    space = ops.space1
    n_harmonic = 3
    n_gradients = ops.kernel_basis.shape[1] - n_harmonic
    projector = CurlKernelProjector(
        ops.kernel_basis[:, :n_gradients].tocsr(),
        ops.kernel_basis[:, n_gradients:].toarray(),
    )
    eps0 = tensor_coefficients(space, coefficients.eps0_inv)[:, 0, 0]
    atol = settings.cg_tol * _load_scale(space.volumes * np.abs(eps0), space.curls)

    columns, reports = [], []
    for l in range(3):
        x, report = cg_projected(ops.curlcurl1, -ops.curl_moments[l], projector, tol=settings.cg_tol,
                                 maxit=settings.cg_maxit, atol=atol)
        if not report.converged:
            logger.error("Cell problem 1 (l=%d) did not converge: residual %.3e", l, report.residual)
            raise SolverError(f"Cell problem 1 did not converge for direction {l}")
        columns.append(x)
        reports.append(report)
    w1 = np.stack(columns, axis=1)
    curl_w1 = np.stack([FieldFunction(space, w1[:, l]).curls() for l in range(3)], axis=2)

    eps_inv_hom = ops.eps0_integral * np.eye(3) + ops.curl_moments @ w1
    logger.info("Cell problem 1 solved: eps_inv_hom diagonal %s", np.array2string(np.diag(eps_inv_hom), precision=6))
    return Cell1Solution(space=space, w1=w1, curl_w1=curl_w1, eps_inv_hom=eps_inv_hom, reports=reports)


def solve_cell2(
    mesh: StructuredTetMesh,
    identification: PeriodicIdentification,
    coefficients: MicroCoefficients,
    settings: Optional[SolverSettings] = None,
    operators: Optional[CellOperators] = None
) -> Cell2Solution:
    """
    Matrix potentials p_l = k^2 w2_l, solving int (e_l + grad p_l) . grad psi = 0

    The periodic Neumann system is singular on constants; it is solved by
    projected CG with mean subtraction and the integral mean is removed afterwards.
    """
    settings = settings or SolverSettings()
    ops = operators or build_cell_operators(mesh, identification, coefficients)
    space = ops.space2
    weights = np.zeros(space.n_dofs)
    np.add.at(weights, space.dof_map.ravel(), np.repeat(space.volumes / 4.0, 4))

    def remove_mean(x: np.ndarray) -> np.ndarray:
        return x - x.mean()

    atol = settings.cg_tol * _load_scale(space.volumes, space.grads)
    columns, reports = [], []
    for l in range(3):
        x, report = cg_projected(ops.stiffness2, -ops.gradient_moments[l], remove_mean, tol=settings.cg_tol,
                                 maxit=settings.cg_maxit, atol=atol)
        if not report.converged:
            logger.error("Cell problem 2 (l=%d) did not converge: residual %.3e", l, report.residual)
            raise SolverError(f"Cell problem 2 did not converge for direction {l}")
        columns.append(x - weights @ x / weights.sum())
        reports.append(report)
    p = np.stack(columns, axis=1)
    grad_p = np.stack([FieldFunction(space, p[:, l]).gradients() for l in range(3)], axis=2)
    logger.info("Cell problem 2 solved in %s CG iterations", [r.iterations for r in reports])
    return Cell2Solution(space=space, p=p, grad_p=grad_p, reports=reports)


def cell3_matrix(operators: CellOperators, k: float) -> sp.csr_matrix:
    """eps1_inv curl-curl - k^2 mass on the inclusion space"""
    return (operators.coefficients.eps1_inv * operators.curlcurl3 - k * k * operators.mass3).tocsr()


def solve_cell3(
    mesh: StructuredTetMesh,
    identification: PeriodicIdentification,
    coefficients: MicroCoefficients,
    k: float,
    settings: Optional[SolverSettings] = None,
    operators: Optional[CellOperators] = None
) -> Cell3Solution:
    """
    Inclusion correctors w3_l at wavenumber k, zero tangential trace on the inclusion boundary

    Raises:
        ResonanceError: The factorization is singular, which happens only for a
            lossless inclusion at one of its Maxwell eigenvalues
    """
    ops = operators or build_cell_operators(mesh, identification, coefficients)
    space = ops.space3
    if space.n_dofs == 0:
        return Cell3Solution(space=space, w3=np.zeros((0, 3), dtype=complex), k=float(k))
    solver = SolverFactory.create(settings or SolverSettings())
    try:
        factorization = solver.factorize(cell3_matrix(ops, k))
    except SingularMatrixError as e:
        logger.error("Cell problem 3 is singular at k=%g", k)
        raise ResonanceError(f"Cell problem 3 is singular at k={k}: {e}") from e
    w3, report = factorization.solve(ops.value_moments.T.astype(complex))
    logger.debug("Cell problem 3 at k=%g: residual %.3e", k, report.residual)
    return Cell3Solution(space=space, w3=np.asarray(w3).reshape(space.n_dofs, 3), k=float(k), report=report)


def solve_cells(
    mesh: StructuredTetMesh,
    identification: PeriodicIdentification,
    coefficients: MicroCoefficients,
    k: Optional[float] = None,
    settings: Optional[SolverSettings] = None
) -> CellSolutions:
    """Cell problems 1 and 2, plus cell problem 3 when a wavenumber is given"""
    ops = build_cell_operators(mesh, identification, coefficients)
    cell1 = solve_cell1(mesh, identification, coefficients, settings, ops)
    cell2 = solve_cell2(mesh, identification, coefficients, settings, ops)
    cell3 = solve_cell3(mesh, identification, coefficients, k, settings, ops) if k is not None else None
    return CellSolutions(operators=ops, cell1=cell1, cell2=cell2, cell3=cell3)


def static_permeability(cells: CellSolutions) -> np.ndarray:
    """Identity plus the k-independent matrix contribution int grad p_l . e_j"""
    return np.eye(3) + cells.operators.gradient_moments @ cells.cell2.p


def compute_mu_hom(cells: CellSolutions, k: float) -> EffectiveTensors:
    """
    Effective tensors at wavenumber k

    Args:
        cells (CellSolutions): Cell solutions with cell problem 3 solved at this k
        k (float): The wavenumber

    Returns:
        EffectiveTensors: eps_inv_hom, mu_hom and its static and dynamic parts
    """
    if cells.cell3 is None or not np.isclose(abs(cells.cell3.k), abs(k), rtol=0, atol=1e-12):
        raise ValueError(f"Cell problem 3 was not solved at k={k}")
    mu_static = static_permeability(cells)
    mu_dynamic = k * k * (cells.operators.value_moments @ cells.cell3.w3)
    return EffectiveTensors(
        eps_inv_hom=cells.cell1.eps_inv_hom,
        mu_hom=mu_static + mu_dynamic,
        k=float(k),
        mu_static=mu_static,
        mu_dynamic=mu_dynamic,
    )


def divergence_defect(cells: CellSolutions, k: float) -> float:
    """
    Weak divergence of chi_matrix grad p_l + chi_inclusion k^2 w3_l against periodic nodal
    test functions on the whole cell, relative to the inclusion load; the largest over l
    """
    if cells.cell3 is None:
        raise ValueError("divergence_defect needs cell problem 3 solved")
    ops = cells.operators
    mesh = ops.mesh
    test_space = NodalSpace(mesh, "periodic_zero_mean", None, ops.identification)
    inside = mesh.subdomain_tag == TAG_INSIDE
    defects: List[float] = []
    for l in range(3):
        vectors = np.zeros((mesh.n_tets, 3), dtype=complex)
        vectors[ops.space2.tets] = cells.cell2.grad_p[:, :, l]
        if cells.cell3.w3.size:
            w3 = FieldFunction(ops.space3, cells.cell3.w3[:, l])
            vectors[ops.space3.tets] = k * k * w3.values(np.full((1, 4), 0.25))[:, 0]
        load = np.zeros((mesh.n_tets, 3))
        load[inside] = UNIT_VECTORS[l]
        reference = np.linalg.norm(assemble_p1_field_load(test_space, load))
        if reference == 0:
            defects.append(0.0)
            continue
        defects.append(float(np.linalg.norm(assemble_p1_field_load(test_space, vectors)) / reference))
    return max(defects)


def cube_resonance_wavenumbers(side: float, eps1_inv: complex, count: int = 3) -> List[float]:
    """
    Wavenumbers of the cube eigenmodes that couple to the mean field

    Modes with two odd indices and one zero have non-zero mean; their eigenvalues
    are (pi/side)^2 (a^2 + b^2) and resonate at k = sqrt(lambda Re(eps1_inv)).
    """
    odd = np.arange(1, 2 * count + 2, 2)
    eigenvalues = sorted({int(a * a + b * b) for a in odd for b in odd if a <= b})
    scale = (np.pi / side) ** 2 * complex(eps1_inv).real
    return [float(np.sqrt(scale * m)) for m in eigenvalues[:count]]
