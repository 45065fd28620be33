from abc import abstractmethod
from typing import Callable, Tuple
import numpy as np
import scipy.sparse as sp
from src.linalg.components import SolverReport


class Factorization():
    """Reusable solve operator for one matrix; used by one thread at a time"""

    def __init__(self, shape: Tuple[int, int], solve: Callable[[np.ndarray], Tuple[np.ndarray, SolverReport]]):
        self.shape = shape
        self._solve = solve

    def solve(self, b: np.ndarray) -> Tuple[np.ndarray, SolverReport]:
        return self._solve(b)


class BaseSolver():

    @abstractmethod
    def solve(self, A: sp.spmatrix, b: np.ndarray) -> Tuple[np.ndarray, SolverReport]:
        """
        Solve a square complex sparse system

        Args:
            A (sp.spmatrix): The system matrix
            b (np.ndarray): The right-hand side

        Returns:
            Tuple[np.ndarray, SolverReport]: The solution and how it was obtained
        """

    @abstractmethod
    def factorize(self, A: sp.spmatrix) -> Factorization:
        """
        Prepare A for repeated solves with different right-hand sides

        Args:
            A (sp.spmatrix): The system matrix

        Returns:
            Factorization: Solve operator bound to A
        """
