import logging
import numpy as np
from src.errors import ConfigError
from src.fem.spaces import FieldFunction
from src.hmm.components import HmmSolution

logger = logging.getLogger(__name__)


def micro_coordinates(points: np.ndarray, delta: float) -> np.ndarray:
    """Wrapped cell coordinates y = (x / delta) mod 1"""
    y = np.mod(np.asarray(points, dtype=float) / delta, 1.0)
    # mod can round up to exactly 1.0 for tiny negative inputs
    return np.where(y >= 1.0, 0.0, y)


def zeroth_order_field(hmm: HmmSolution, delta: float, points: np.ndarray) -> np.ndarray:
    """
    u_H + grad_y u_h2(x, x/delta) + u_h3(x, x/delta) at physical points

    The correctors are supported in Omega; elsewhere the macro field is returned
    unchanged. u_H is affine per macro tet, so the corrector coefficients at x
    follow from u_H(x) directly.

    Args:
        hmm (HmmSolution): Solution with cell problems 2 and 3 solved
        delta (float): Period of the microstructure
        points (np.ndarray): (N, 3) points in G

    Returns:
        np.ndarray: (N, 3) complex field values
    """
    if delta <= 0:
        raise ConfigError(f"delta must be positive, got {delta}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    u = hmm.macro.u_H.evaluate(points).astype(complex)
    inside = hmm.config.Omega.contains(points, strict=True)
    if not np.any(inside):
        return u

    ops = hmm.cells.operators
    y = micro_coordinates(points[inside], delta)
    tet_ids, _ = ops.mesh.locate(y)
    u_in = u[inside]
    correction = np.zeros_like(u_in)

    position = ops.space2.tet_position[tet_ids]
    matrix = position >= 0
    correction[matrix] = np.einsum("nil,nl->ni", hmm.cells.cell2.grad_p[position[matrix]], u_in[matrix])

    cell3 = hmm.cells.cell3
    if cell3 is not None and cell3.w3.size:
        for l in range(3):
            w3 = FieldFunction(ops.space3, cell3.w3[:, l]).evaluate(y)
            correction += hmm.k ** 2 * u_in[:, l, None] * w3
    u[inside] = u_in + correction
    logger.debug("Zeroth-order field at %d points, %d inside Omega", len(points), int(inside.sum()))
    return u
