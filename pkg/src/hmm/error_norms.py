import logging
from typing import List, Optional, Sequence, Tuple
import numpy as np
from src.errors import SolverError
from src.fem.assembly import assemble_gradient_coupling, assemble_p1_mass, assemble_p1_stiffness
from src.fem.interpolation import transfer_edge_field
from src.fem.norms import weighted_norms
from src.fem.spaces import EdgeSpace, FieldFunction, NodalSpace
from src.hmm.components import ErrorReport
from src.linalg.solvers.direct import DirectSolver
from src.macro.components import MacroSolution

logger = logging.getLogger(__name__)


def error_field(
    solution: MacroSolution,
    reference: MacroSolution,
    allow_evaluation: bool = False
) -> FieldFunction:
    """e0 = u_ref - u_H on the reference edge space"""
    target: EdgeSpace = reference.u_H.space
    transferred = transfer_edge_field(solution.u_H, target, allow_evaluation)
    return FieldFunction(target, reference.u_H.coefficients - transferred.coefficients)


def helmholtz_theta(e0: FieldFunction) -> Tuple[FieldFunction, float]:
    """
    Gradient part theta of the error: int grad theta . grad phi = int e0 . grad phi

    theta is sought among P1 functions vanishing on the boundary of G.

    Args:
        e0 (FieldFunction): Edge field on the whole reference mesh

    Returns:
        Tuple[FieldFunction, float]: theta and its L2 norm
    """
    if not e0.is_edge_field:
        raise TypeError("helmholtz_theta needs an edge field")
    nodal = NodalSpace(e0.space.mesh, "zero_boundary")
    if nodal.n_dofs == 0:
        return FieldFunction(nodal, np.zeros(0, dtype=complex)), 0.0
    stiffness = assemble_p1_stiffness(nodal)
    rhs = assemble_gradient_coupling(nodal, e0.space) @ e0.coefficients
    theta, report = DirectSolver().solve(stiffness, rhs)
    if not report.converged:
        logger.error("Poisson solve for theta failed: residual %.3e", report.residual)
        raise SolverError(f"Poisson solve for theta failed: residual {report.residual:.3e}")
    theta_l2 = np.sqrt(max(np.real(np.vdot(theta, assemble_p1_mass(nodal) @ theta)), 0.0))
    return FieldFunction(nodal, theta), float(theta_l2)


def error_norms(
    solution: MacroSolution,
    reference: MacroSolution,
    k: Optional[float] = None,
    h: Optional[float] = None,
    allow_evaluation: bool = False
) -> ErrorReport:
    """
    L2 and curl errors of a macro solution against a finer reference, plus the theta norm

    Args:
        solution (MacroSolution): Coarse solution
        reference (MacroSolution): Reference solution on a refinement of the same box
        k (Optional[float]): Wavenumber to report; defaults to the solution's
        h (Optional[float]): Micro mesh size to report; defaults to H
        allow_evaluation (bool): Accept non-nested meshes

    Returns:
        ErrorReport: ||e0||, ||curl e0||, ||theta|| and the mesh sizes

    Raises:
        TransferError: The meshes are not nested and evaluation transfer was not allowed
    """
    e0 = error_field(solution, reference, allow_evaluation)
    norms = weighted_norms(e0, solution.k if k is None else k)
    _, theta_l2 = helmholtz_theta(e0)
    report = ErrorReport(
        l2=norms.l2,
        curl_semi=norms.curl_semi,
        theta_l2=theta_l2,
        H=solution.H,
        h=solution.H if h is None else float(h),
        k=float(solution.k if k is None else k),
    )
    logger.info("Errors at H=%.4g: ||e0||=%.6g, ||curl e0||=%.6g, ||theta||=%.6g",
                report.H, report.l2, report.curl_semi, report.theta_l2)
    return report


def eoc(errors: Sequence[Tuple[float, float]]) -> List[Optional[float]]:
    """
    Experimental orders of convergence ln(e_i / e_i+1) / ln(H_i / H_i+1)

    Args:
        errors: (mesh size, error) pairs with strictly decreasing mesh sizes

    Returns:
        List[Optional[float]]: One value per consecutive pair, None where an error is not positive
    """
    sizes = [float(H) for H, _ in errors]
    if any(H <= 0 for H in sizes):
        raise ValueError("Mesh sizes must be positive")
    if any(a <= b for a, b in zip(sizes, sizes[1:])):
        raise ValueError("Mesh sizes must be strictly decreasing")
    orders: List[Optional[float]] = []
    for (H1, e1), (H2, e2) in zip(errors, errors[1:]):
        if e1 <= 0 or e2 <= 0:
            orders.append(None)
            continue
        orders.append(float(np.log(e1 / e2) / np.log(H1 / H2)))
    return orders
