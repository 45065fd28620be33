import logging
from typing import Optional, Tuple
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from src.errors import SingularMatrixError
from src.config.settings import SolverSettings
from src.linalg.base_solver import BaseSolver, Factorization
from src.linalg.components import SolverReport, as_csr, relative_residual

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-13


class DirectSolver(BaseSolver):
    """Sparse complex LU; the fill-reducing column ordering comes from the settings"""

    def __init__(self, settings: Optional[SolverSettings] = None):
        self.settings = settings or SolverSettings()

    def _prepare(self, A: sp.spmatrix) -> sp.csc_matrix:
        A = as_csr(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"Direct solve needs a square matrix, got {A.shape}")
        row_norms = np.asarray(abs(A).sum(axis=1)).ravel()
        empty = np.flatnonzero(row_norms == 0)
        if len(empty):
            logger.error("Matrix has a zero row at index %d", empty[0])
            raise SingularMatrixError(f"Zero row {empty[0]} in system matrix", row=int(empty[0]))
        return A.astype(np.complex128).tocsc()

    def factorize(self, A: sp.spmatrix) -> Factorization:
        A = self._prepare(A)
        try:
            lu = spla.splu(A, permc_spec=self.settings.ordering)
        except RuntimeError as e:
            logger.error("LU factorization failed: %s", e)
            raise SingularMatrixError(f"Singular factorization: {e}") from e

        pivots = np.abs(lu.U.diagonal())
        scale = pivots.max() if len(pivots) else 1.0
        small = np.flatnonzero(pivots <= PIVOT_TOL * scale)
        if len(small):
            row = int(np.flatnonzero(lu.perm_r == small[0])[0])
            logger.error("Numerically singular pivot at row %d (|u| = %.3e)", row, pivots[small[0]])
            raise SingularMatrixError(f"Numerically singular pivot at row {row}", row=row)
        logger.debug("LU of %d x %d (%s): nnz(L)=%d, nnz(U)=%d", A.shape[0], A.shape[1], self.settings.ordering,
                     lu.L.nnz, lu.U.nnz)

        def solve(b: np.ndarray) -> Tuple[np.ndarray, SolverReport]:
            b = np.asarray(b, dtype=np.complex128)
            x = lu.solve(b)
            residual = relative_residual(A, x, b)
            iterations = 0
            if residual > self.settings.rtol:
                x = x + lu.solve(b - A @ x)
                residual = relative_residual(A, x, b)
                iterations = 1
            converged = residual <= self.settings.rtol
            if not converged:
                logger.warning("Direct solve residual %.3e above %.1e after refinement", residual,
                               self.settings.rtol)
            return x, SolverReport(iterations=iterations, residual=residual, converged=converged)

        return Factorization(A.shape, solve)

    def solve(self, A: sp.spmatrix, b: np.ndarray) -> Tuple[np.ndarray, SolverReport]:
        return self.factorize(A).solve(b)


def direct_solve(A: sp.spmatrix, b: np.ndarray) -> Tuple[np.ndarray, SolverReport]:
    """Sparse LU solve with at most one pass of iterative refinement"""
    return DirectSolver().solve(A, b)
