import numpy as np
from src.mesh.components import LOCAL_EDGES

_EDGE_A = np.array([a for a, _ in LOCAL_EDGES])
_EDGE_B = np.array([b for _, b in LOCAL_EDGES])


def whitney_values(grads: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """
    Lowest-order edge functions lambda_a grad(lambda_b) - lambda_b grad(lambda_a)

    Args:
        grads (np.ndarray): (T, 4, 3) barycentric gradients
        bary (np.ndarray): (Q, 4) shared or (T, Q, 4) per-tet barycentric points

    Returns:
        np.ndarray: (T, Q, 6, 3) local basis values
    """
    if bary.ndim == 2:
        bary = np.broadcast_to(bary, (grads.shape[0],) + bary.shape)
    la = bary[:, :, _EDGE_A][..., None]
    lb = bary[:, :, _EDGE_B][..., None]
    ga = grads[:, None, _EDGE_A, :]
    gb = grads[:, None, _EDGE_B, :]
    return la * gb - lb * ga


def whitney_curls(grads: np.ndarray) -> np.ndarray:
    """(T, 6, 3) constant curls 2 grad(lambda_a) x grad(lambda_b)"""
    return 2.0 * np.cross(grads[:, _EDGE_A, :], grads[:, _EDGE_B, :])
