import logging
from typing import Callable, Union
import numpy as np
from src.errors import TransferError
from src.fem.quadrature import EDGE_GAUSS_TWO
from src.fem.spaces import EdgeSpace, FieldFunction, NodalSpace

logger = logging.getLogger(__name__)

VectorSource = Union[Callable[[np.ndarray], np.ndarray], FieldFunction]


def _as_callable(field: VectorSource) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(field, FieldFunction):
        return field.evaluate
    return field


def interpolate_edge(space: EdgeSpace, field: VectorSource) -> FieldFunction:
    """
    Edge interpolant: the dof of an edge is the line integral of field . tangent

    Args:
        space (EdgeSpace): Target space
        field (VectorSource): Callable on (N, 3) points or a discrete field on another mesh

    Returns:
        FieldFunction: The interpolant, integrated with two-point Gauss per edge
    """
    evaluate = _as_callable(field)
    mesh = space.mesh
    edges = mesh.edges[space.dof_edges]
    start = mesh.vertices[edges[:, 0]]
    tangent = mesh.vertices[edges[:, 1]] - start
    t = EDGE_GAUSS_TWO.points[:, 1]
    points = start[:, None, :] + t[None, :, None] * tangent[:, None, :]
    values = np.asarray(evaluate(points.reshape(-1, 3))).reshape(points.shape)
    dofs = np.einsum("q,eqi,ei->e", EDGE_GAUSS_TWO.normalized_weights, values, tangent)
    return FieldFunction(space, dofs)


def interpolate_nodal(space: NodalSpace, func: Callable[[np.ndarray], np.ndarray]) -> FieldFunction:
    """Nodal interpolant taking the function value at each representative vertex"""
    values = np.asarray(func(space.mesh.vertices[space.dof_vertices]))
    return FieldFunction(space, values)


def transfer_edge_field(u: FieldFunction, target: EdgeSpace, allow_evaluation: bool = False) -> FieldFunction:
    """
    Move an edge field onto a finer structured mesh of the same box

    For nested meshes every target edge lies in one source tet, so the
    interpolation is exact. Otherwise the result is only an approximation and
    must be requested explicitly.

    Args:
        u (FieldFunction): Source field
        target (EdgeSpace): Space on the target mesh
        allow_evaluation (bool): Accept non-nested meshes

    Returns:
        FieldFunction: The transferred field
    """
    source_mesh = u.space.mesh
    target_mesh = target.mesh
    if source_mesh.box != target_mesh.box:
        logger.error("Cannot transfer between boxes %s and %s", source_mesh.box, target_mesh.box)
        raise TransferError("Source and target meshes cover different boxes")
    nested = target_mesh.n_per_axis % source_mesh.n_per_axis == 0
    if not nested and not allow_evaluation:
        logger.error("Mesh n=%d is not a refinement of n=%d", target_mesh.n_per_axis, source_mesh.n_per_axis)
        raise TransferError(
            f"Target resolution {target_mesh.n_per_axis} is not a multiple of {source_mesh.n_per_axis}"
        )
    if source_mesh is target_mesh and u.space is target:
        return FieldFunction(target, u.coefficients.copy())
    return interpolate_edge(target, u)
