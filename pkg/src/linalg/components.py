from dataclasses import dataclass
import logging
from pathlib import Path
import numpy as np
import scipy.io
import scipy.sparse as sp

logger = logging.getLogger(__name__)


@dataclass
class SolverReport:
    """Outcome of a linear solve"""
    iterations: int
    residual: float
    converged: bool

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError("residual must be non-negative")


def as_csr(A) -> sp.csr_matrix:
    """Canonical CSR form: sorted, duplicate-free column indices per row"""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product y = A x"""
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"Dimension mismatch: matrix {A.shape} times vector of length {x.shape[0]}")
    return as_csr(A) @ x


def is_structurally_symmetric(A: sp.spmatrix) -> bool:
    """True if the pattern of (i, j) matches the pattern of (j, i)"""
    pattern = as_csr(A).copy()
    pattern.data = np.ones_like(pattern.data, dtype=np.int8)
    return (pattern != pattern.T).nnz == 0


def symmetry_defect(A: sp.spmatrix) -> float:
    """Largest entry of A - A^T (entrywise transpose, no conjugation)"""
    diff = as_csr(A - A.T)
    return float(np.abs(diff.data).max()) if diff.nnz else 0.0


def relative_residual(A: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    norm_b = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / norm_b) if norm_b > 0 else float(r)


def dump_matrix_market(A: sp.spmatrix, path: Path, comment: str = "") -> Path:
    """Writes A in Matrix Market coordinate complex general format"""
    path = Path(path)
    if path.suffix != ".mtx":
        path = path.with_name(path.name + ".mtx")
    scipy.io.mmwrite(str(path), sp.coo_matrix(A, dtype=np.complex128), comment=comment, field="complex",
                     symmetry="general")
    logger.debug("Dumped %s matrix to %s", A.shape, path)
    return path
