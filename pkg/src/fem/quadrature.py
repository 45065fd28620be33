from dataclasses import dataclass
import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points and weights on a reference simplex"""
    points: np.ndarray
    weights: np.ndarray
    order: int
    reference_measure: float

    def __post_init__(self):
        if abs(self.weights.sum() - self.reference_measure) > 1e-14:
            raise ValueError("Quadrature weights must sum to the reference measure")

    @property
    def normalized_weights(self) -> np.ndarray:
        """Weights for integrating over a simplex of unit measure"""
        return self.weights / self.reference_measure


def _permutations(a: float, b: float) -> np.ndarray:
    return np.array([[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]])


# Barycenter rule {|T|, x_T}: exact for linear integrands
TET_ONE_POINT = QuadratureRule(
    points=np.full((1, 4), 0.25),
    weights=np.array([1.0 / 6.0]),
    order=1,
    reference_measure=1.0 / 6.0,
)

# Four-point rule Q2: exact for quadratic integrands
_A = (5.0 + 3.0 * np.sqrt(5.0)) / 20.0
_B = (5.0 - np.sqrt(5.0)) / 20.0
TET_DEGREE_TWO = QuadratureRule(
    points=_permutations(_A, _B),
    weights=np.full(4, 1.0 / 24.0),
    order=2,
    reference_measure=1.0 / 6.0,
)

# Edge midpoints: exact for quadratics on a triangle
TRI_DEGREE_TWO = QuadratureRule(
    points=np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    weights=np.full(3, 1.0 / 6.0),
    order=2,
    reference_measure=0.5,
)

# Seven-point Dunavant rule, degree five
_TRI5 = [
    (np.array([[1 / 3, 1 / 3, 1 / 3]]), 0.225),
    (np.array([[0.059715871789770, 0.470142064105115, 0.470142064105115],
               [0.470142064105115, 0.059715871789770, 0.470142064105115],
               [0.470142064105115, 0.470142064105115, 0.059715871789770]]), 0.132394152788506),
    (np.array([[0.797426985353087, 0.101286507323456, 0.101286507323456],
               [0.101286507323456, 0.797426985353087, 0.101286507323456],
               [0.101286507323456, 0.101286507323456, 0.797426985353087]]), 0.125939180544827),
]
_tri5_weights = np.concatenate([np.full(len(p), w) for p, w in _TRI5])
TRI_DEGREE_FIVE = QuadratureRule(
    points=np.concatenate([p for p, _ in _TRI5]),
    weights=0.5 * _tri5_weights / _tri5_weights.sum(),
    order=5,
    reference_measure=0.5,
)

# Two-point Gauss on [0, 1]
_G = 0.5 / np.sqrt(3.0)
EDGE_GAUSS_TWO = QuadratureRule(
    points=np.array([[0.5 + _G, 0.5 - _G], [0.5 - _G, 0.5 + _G]]),
    weights=np.array([0.5, 0.5]),
    order=3,
    reference_measure=1.0,
)
