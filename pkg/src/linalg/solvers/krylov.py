import logging
import math
from typing import Callable, Optional, Tuple
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from src.config.settings import SolverSettings
from src.linalg.base_solver import BaseSolver, Factorization
from src.linalg.components import SolverReport, as_csr, relative_residual

logger = logging.getLogger(__name__)

MAX_RESTARTS = 5


class GmresSolver(BaseSolver):
    """Restarted GMRES with a Jacobi preconditioner, for runs where LU fill does not fit in memory"""

    def __init__(self, settings: Optional[SolverSettings] = None):
        self.settings = settings or SolverSettings()

    def solve(self, A: sp.spmatrix, b: np.ndarray) -> Tuple[np.ndarray, SolverReport]:
        A = as_csr(A).astype(np.complex128)
        b = np.asarray(b, dtype=np.complex128)
        if b.ndim == 2:
            columns = [self.solve(A, b[:, j]) for j in range(b.shape[1])]
            x = np.stack([c[0] for c in columns], axis=1)
            return x, SolverReport(
                iterations=max(c[1].iterations for c in columns),
                residual=max(c[1].residual for c in columns),
                converged=all(c[1].converged for c in columns),
            )
        diagonal = A.diagonal()
        diagonal[diagonal == 0] = 1.0
        M = sp.diags(1.0 / diagonal)
        iterations = 0

        def count(_):
            nonlocal iterations
            iterations += 1

        # maxit bounds inner iterations; scipy counts restart cycles
        restart = min(self.settings.restart, self.settings.maxit)
        x, info = spla.gmres(
            A, b, M=M,
            rtol=self.settings.rtol,
            restart=restart,
            maxiter=math.ceil(self.settings.maxit / restart),
            callback=count,
            callback_type="pr_norm",
        )
        residual = relative_residual(A, x, b)
        if info != 0:
            logger.warning("GMRES stopped with info=%d after %d iterations (residual %.3e)", info, iterations,
                           residual)
        return x, SolverReport(iterations=iterations, residual=residual, converged=info == 0)

    def factorize(self, A: sp.spmatrix) -> Factorization:
        return Factorization(A.shape, lambda b: self.solve(A, b))


def cg_projected(
    A: sp.spmatrix,
    b: np.ndarray,
    kernel_projector: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-10,
    maxit: int = 10000,
    atol: float = 0.0
) -> Tuple[np.ndarray, SolverReport]:
    """
    Conjugate gradients for a consistent Hermitian positive semidefinite system

    The projector removes the known kernel component from every residual and
    iterate, so the iteration stays in the range of A.

    Args:
        A (sp.spmatrix): Hermitian positive semidefinite matrix
        b (np.ndarray): Right-hand side in the range of A
        kernel_projector (Callable): Maps a vector to its component orthogonal to ker(A)
        tol (float): Relative residual target
        maxit (int): Iteration limit
        atol (float): Absolute residual floor, for right-hand sides at round-off level

    Returns:
        Tuple[np.ndarray, SolverReport]: The solution with zero kernel component and the report
    """
    b = np.asarray(b)
    dtype = np.result_type(A.dtype, b.dtype)
    x = np.zeros(b.shape[0], dtype=dtype)
    norm_b = float(np.linalg.norm(b))
    threshold = max(tol * norm_b, atol)

    def true_residual(x):
        return float(np.linalg.norm(b - A @ x))

    if norm_b <= threshold:
        return x, SolverReport(iterations=0, residual=norm_b, converged=True)

    iterations = 0
    # restart from the true residual
    for _ in range(MAX_RESTARTS):
        r = kernel_projector(b - A @ x)
        rho = np.vdot(r, r).real
        if np.sqrt(rho) <= threshold:
            break
        p = r.copy()
        while iterations < maxit and np.sqrt(rho) > 0.5 * threshold:
            q = A @ p
            curvature = np.vdot(p, q).real
            if curvature <= np.finfo(float).tiny:
                logger.debug("CG breakdown: zero curvature after %d iterations", iterations)
                break
            alpha = rho / curvature
            x = kernel_projector(x + alpha * p)
            r = kernel_projector(r - alpha * q)
            rho_next = np.vdot(r, r).real
            p = r + (rho_next / rho) * p
            rho = rho_next
            iterations += 1
        if true_residual(x) <= threshold or iterations >= maxit:
            break

    residual = true_residual(x)
    converged = residual <= threshold
    if not converged:
        logger.warning("Projected CG did not converge: residual %.3e after %d iterations", residual / norm_b,
                       iterations)
    else:
        logger.debug("Projected CG converged in %d iterations (residual %.3e)", iterations, residual / norm_b)
    return x, SolverReport(iterations=iterations, residual=residual / norm_b, converged=converged)
