from typing import Optional
from src.config.settings import SolverSettings
from src.linalg.base_solver import BaseSolver
from src.linalg.solvers.direct import DirectSolver
from src.linalg.solvers.krylov import GmresSolver


class SolverFactory:
    @staticmethod
    def create(config: Optional[SolverSettings] = None) -> BaseSolver:
        config = config or SolverSettings()
        if config.kind == "direct":
            return DirectSolver(config)
        if config.kind == "gmres":
            return GmresSolver(config)
        raise ValueError(f"Unknown solver kind: {config.kind}")
