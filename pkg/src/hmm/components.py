from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional
import numpy as np
from src.fem.quadrature import TET_DEGREE_TWO
from src.fem.spaces import FieldFunction
from src.linalg.components import SolverReport
from src.macro.components import MacroSolution, ScatterConfig
from src.mesh.components import TAG_INSIDE
from src.micro.components import CellOperators, CellSolutions, EffectiveTensors


@dataclass(eq=False)
class HmmSolution:
    """
    Macro solution with the cell solutions that define its correctors

    Corrector coefficients are formed on demand from u_H at the macro quadrature
    points: u_h1 per scatterer tet from curl u_H, u_h2 and u_h3 per point of the
    second-order rule.
    """
    macro: MacroSolution
    cells: CellSolutions
    tensors: EffectiveTensors
    config: ScatterConfig

    @property
    def k(self) -> float:
        return self.macro.k

    @cached_property
    def scatterer_tets(self) -> np.ndarray:
        return np.flatnonzero(self.macro.mesh.subdomain_tag == TAG_INSIDE)

    @cached_property
    def macro_curls(self) -> np.ndarray:
        """(T_Omega, 3) curl u_H per scatterer tet"""
        space = self.macro.u_H.space
        return self.macro.u_H.curls()[space.tet_position[self.scatterer_tets]]

    @cached_property
    def macro_values(self) -> np.ndarray:
        """(T_Omega, 4, 3) u_H at the second-order quadrature points of each scatterer tet"""
        space = self.macro.u_H.space
        return self.macro.u_H.values(TET_DEGREE_TWO.points)[space.tet_position[self.scatterer_tets]]

    def corrector1(self, tet: int) -> np.ndarray:
        """Coefficients of u_h1 = sum_j (curl u_H)_j w1_j on scatterer tet `tet`"""
        return self.cells.cell1.w1 @ self.macro_curls[tet]

    def corrector2(self, tet: int, point: int) -> np.ndarray:
        """Coefficients of u_h2 = sum_j (u_H)_j p_j at one quadrature point"""
        return self.cells.cell2.p @ self.macro_values[tet, point]

    def corrector3(self, tet: int, point: int) -> np.ndarray:
        """Coefficients of u_h3 = k^2 sum_j (u_H)_j w3_j at one quadrature point"""
        return self.k ** 2 * (self.cells.cell3.w3 @ self.macro_values[tet, point])


@dataclass(eq=False)
class TwoScaleSolution:
    """Solution of the directly assembled two-scale system

    u1 holds one row per scatterer tet; u2 and u3 one row per quadrature point,
    tet-major.
    """
    u_H: FieldFunction
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    operators: CellOperators
    report: SolverReport


@dataclass
class ErrorReport:
    """Errors of one study row against the reference solution"""
    l2: float
    curl_semi: float
    theta_l2: float
    H: float
    h: float
    k: float

    def __post_init__(self):
        if min(self.l2, self.curl_semi, self.theta_l2) < 0:
            raise ValueError("Error norms must be non-negative")


@dataclass
class ConvergenceReport:
    """Study rows with EOCs between consecutive rows; None where undefined"""
    rows: List[ErrorReport]
    eoc_l2: List[Optional[float]] = field(default_factory=list)
    eoc_curl: List[Optional[float]] = field(default_factory=list)
    eoc_theta: List[Optional[float]] = field(default_factory=list)

    def row_eocs(self, index: int):
        """EOC triple of row `index`, computed against the previous row"""
        if index == 0:
            return None, None, None
        return self.eoc_l2[index - 1], self.eoc_curl[index - 1], self.eoc_theta[index - 1]
