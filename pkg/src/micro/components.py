from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union
import numpy as np
import scipy.sparse as sp
from src.errors import ConfigError
from src.fem.spaces import EdgeSpace, NodalSpace
from src.linalg.components import SolverReport
from src.mesh.components import StructuredTetMesh, PeriodicIdentification


@dataclass(frozen=True)
class MicroCoefficients:
    """Inverse permittivities of the cell: eps0_inv on the matrix, eps1_inv on the inclusion"""
    eps0_inv: Union[float, np.ndarray]
    eps1_inv: complex
    allow_lossless: bool = False

    def __post_init__(self):
        if np.any(np.asarray(self.eps0_inv) <= 0):
            raise ConfigError("eps0_inv must be positive")
        eps1 = complex(self.eps1_inv)
        if eps1.imag > 0 or (eps1.imag == 0 and not self.allow_lossless):
            raise ConfigError(f"eps1_inv needs a negative imaginary part, got {eps1}")
        object.__setattr__(self, "eps1_inv", eps1)


@dataclass(eq=False)
class CellOperators:
    """Spaces, matrices and kernel data of the three cell problems on one cell mesh"""
    mesh: StructuredTetMesh
    identification: PeriodicIdentification
    coefficients: MicroCoefficients
    space1: EdgeSpace
    curlcurl1: sp.csr_matrix
    curl_moments: np.ndarray
    kernel_basis: sp.csr_matrix
    space2: NodalSpace
    stiffness2: sp.csr_matrix
    gradient_moments: np.ndarray
    space3: EdgeSpace
    curlcurl3: sp.csr_matrix
    mass3: sp.csr_matrix
    value_moments: np.ndarray
    eps0_integral: float


@dataclass(eq=False)
class Cell1Solution:
    """Correctors w1_l (columns) on the matrix and the effective inverse permittivity"""
    space: EdgeSpace
    w1: np.ndarray
    curl_w1: np.ndarray
    eps_inv_hom: np.ndarray
    reports: List[SolverReport] = field(default_factory=list)


@dataclass(eq=False)
class Cell2Solution:
    """Potentials p_l = k^2 w2_l (columns) on the matrix; independent of k"""
    space: NodalSpace
    p: np.ndarray
    grad_p: np.ndarray
    reports: List[SolverReport] = field(default_factory=list)


@dataclass(eq=False)
class Cell3Solution:
    """Inclusion correctors w3_l (columns) at wavenumber k"""
    space: EdgeSpace
    w3: np.ndarray
    k: float
    report: Optional[SolverReport] = None


@dataclass(eq=False)
class CellSolutions:
    operators: CellOperators
    cell1: Cell1Solution
    cell2: Cell2Solution
    cell3: Optional[Cell3Solution] = None

    @property
    def k(self) -> Optional[float]:
        return self.cell3.k if self.cell3 is not None else None


@dataclass
class EffectiveTensors:
    """
    Homogenized material tensors at one wavenumber

    mu_hom = mu_static + mu_dynamic, where mu_static holds the identity and the
    k-independent matrix contribution and mu_dynamic the inclusion contribution.
    """
    eps_inv_hom: np.ndarray
    mu_hom: np.ndarray
    k: float
    mu_static: Optional[np.ndarray] = None
    mu_dynamic: Optional[np.ndarray] = None

    @classmethod
    def identity(cls, k: float) -> "EffectiveTensors":
        return cls(eps_inv_hom=np.eye(3), mu_hom=np.eye(3, dtype=complex), k=k,
                   mu_static=np.eye(3), mu_dynamic=np.zeros((3, 3), dtype=complex))

    def eps_asymmetry(self) -> float:
        return float(np.abs(self.eps_inv_hom - self.eps_inv_hom.T).max())

    def mu_asymmetry(self) -> float:
        return float(np.abs(self.mu_hom - self.mu_hom.T).max())

    def eps_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.eps_inv_hom + self.eps_inv_hom.T))

    def mu_imag_eigenvalues(self) -> np.ndarray:
        im = self.mu_hom.imag
        return np.linalg.eigvalsh(0.5 * (im + im.T))

    def mu_real_eigenvalues(self) -> np.ndarray:
        re = self.mu_hom.real
        return np.linalg.eigvalsh(0.5 * (re + re.T))


@dataclass
class SweepRow:
    """One wavenumber of a permeability sweep; mu_hom is None when the cell solve failed"""
    k: float
    mu_hom: Optional[np.ndarray]
    error: Optional[str] = None

    @property
    def diagonal(self) -> Optional[np.ndarray]:
        return None if self.mu_hom is None else np.diag(self.mu_hom)


@dataclass
class ResonanceInterval:
    k_lo: float
    k_hi: float
    k_peak: Optional[float] = None
    peak_im: Optional[float] = None

    def contains(self, k: float, slack: float = 0.0) -> bool:
        return self.k_lo - slack <= k <= self.k_hi + slack


@dataclass
class MuSweep:
    """Permeability sweep over a wavenumber grid with its resonance and band-gap analysis"""
    rows: List[SweepRow]
    mu_static: np.ndarray
    resonances: List[ResonanceInterval] = field(default_factory=list)
    band_gaps: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def ks(self) -> np.ndarray:
        return np.array([r.k for r in self.rows])

    def valid_rows(self) -> List[SweepRow]:
        return [r for r in self.rows if r.mu_hom is not None]
