import logging
from typing import Callable, Optional, Union
import numpy as np
import scipy.sparse as sp
from src.fem.basis import whitney_values
from src.fem.quadrature import QuadratureRule, TET_DEGREE_TWO, TET_ONE_POINT, TRI_DEGREE_TWO, TRI_DEGREE_FIVE
from src.fem.spaces import EdgeSpace, NodalSpace, _Space
from src.linalg.components import as_csr

logger = logging.getLogger(__name__)

Coefficient = Union[complex, float, np.ndarray]
VectorField = Callable[[np.ndarray], np.ndarray]
BoundaryField = Callable[[np.ndarray, np.ndarray], np.ndarray]


def tensor_coefficients(space: _Space, coeff: Coefficient) -> np.ndarray:
    """
    Normalize a coefficient to one 3x3 tensor per selected tet

    Args:
        space (_Space): The space whose tets the coefficient lives on
        coeff (Coefficient): A scalar, per-tet scalars, one 3x3 tensor or per-tet tensors.
            Per-tet data may be indexed by mesh tet or by the space's own selection.

    Returns:
        np.ndarray: (T, 3, 3) coefficient tensors
    """
    c = np.asarray(coeff)
    n_sel = len(space.tets)
    n_mesh = space.mesh.n_tets
    if c.ndim in (1, 3) and c.shape[0] == n_mesh and n_sel != n_mesh:
        c = c[space.tets]
    if c.ndim == 0:
        return np.broadcast_to(c * np.eye(3), (n_sel, 3, 3))
    if c.ndim == 1 and c.shape[0] == n_sel:
        return c[:, None, None] * np.eye(3)
    if c.shape == (3, 3):
        return np.broadcast_to(c, (n_sel, 3, 3))
    if c.ndim == 3 and c.shape == (n_sel, 3, 3):
        return c
    raise ValueError(f"Coefficient of shape {c.shape} does not fit {n_sel} tets")


def _scatter(local: np.ndarray, rows: _Space, cols: _Space) -> sp.csr_matrix:
    if not np.array_equal(rows.tets, cols.tets):
        raise ValueError("Row and column spaces must live on the same tets")
    r = np.broadcast_to(rows.dof_map[:, :, None], local.shape)
    c = np.broadcast_to(cols.dof_map[:, None, :], local.shape)
    values = local * rows.dof_sign[:, :, None] * cols.dof_sign[:, None, :]
    keep = (r >= 0) & (c >= 0)
    matrix = sp.coo_matrix((values[keep], (r[keep], c[keep])), shape=(rows.n_dofs, cols.n_dofs))
    return as_csr(matrix)


def _scatter_vector(local: np.ndarray, space: _Space) -> np.ndarray:
    out = np.zeros(space.n_dofs, dtype=np.result_type(local.dtype, float))
    keep = space.dof_map >= 0
    np.add.at(out, space.dof_map[keep], (local * space.dof_sign)[keep])
    return out


def assemble_curlcurl(space: EdgeSpace, coeff: Coefficient = 1.0) -> sp.csr_matrix:
    """
    Curl-curl matrix A_ab = sum_T (C_T curl phi_b) . curl phi_a |T|

    Curls of lowest-order edge functions are constant per tet, so the integration is exact.
    """
    C = tensor_coefficients(space, coeff)
    local = np.einsum("tai,tij,tbj->tab", space.curls, C, space.curls) * space.volumes[:, None, None]
    matrix = _scatter(local, space, space)
    logger.debug("Assembled curl-curl: %d dofs, nnz=%d", space.n_dofs, matrix.nnz)
    return matrix


def assemble_mass(space: EdgeSpace, coeff: Coefficient = 1.0,
                  rule: QuadratureRule = TET_DEGREE_TWO) -> sp.csr_matrix:
    """Edge mass matrix M_ab = sum_T int_T (C_T phi_b) . phi_a, integrated with `rule`"""
    C = tensor_coefficients(space, coeff)
    values = space.values(rule.points)
    local = np.einsum("q,tqai,tij,tqbj->tab", rule.normalized_weights, values, C, values)
    local = local * space.volumes[:, None, None]
    return _scatter(local, space, space)


def _face_barycentric(space: _Space, faces: np.ndarray, parents: np.ndarray,
                      rule: QuadratureRule) -> np.ndarray:
    """(F, Q, 4) barycentric coordinates of face quadrature points in the parent tets"""
    parent_vertices = space.mesh.tets[parents]
    match = (faces[:, :, None] == parent_vertices[:, None, :]).astype(float)
    return np.einsum("qk,fkl->fql", rule.points, match)


def _boundary_selection(space: _Space, face_mask: Optional[np.ndarray]):
    mesh = space.mesh
    positions = space.tet_position[mesh.boundary_parents]
    selected = positions >= 0
    if face_mask is not None:
        selected &= np.asarray(face_mask, dtype=bool)
    return np.flatnonzero(selected), positions[selected]


def assemble_boundary_tangential_mass(space: EdgeSpace, face_mask: Optional[np.ndarray] = None) -> sp.csr_matrix:
    """
    Boundary matrix B_ab = sum_F int_F (phi_b)_T . (phi_a)_T

    Args:
        space (EdgeSpace): Edge space over tets that own the boundary faces
        face_mask (Optional[np.ndarray]): Restricts the sum to the selected boundary faces

    Returns:
        sp.csr_matrix: The tangential trace mass matrix
    """
    mesh = space.mesh
    faces, positions = _boundary_selection(space, face_mask)
    bary = _face_barycentric(space, mesh.boundary_faces[faces], mesh.boundary_parents[faces], TRI_DEGREE_TWO)
    values = whitney_values(space.grads[positions], bary)
    normals = mesh.boundary_normals[faces]
    normal_part = np.einsum("fqai,fi->fqa", values, normals)
    local = np.einsum("q,fqai,fqbi->fab", TRI_DEGREE_TWO.normalized_weights, values, values) \
        - np.einsum("q,fqa,fqb->fab", TRI_DEGREE_TWO.normalized_weights, normal_part, normal_part)
    local = local * mesh.boundary_areas[faces][:, None, None]

    full = np.zeros((len(space.tets), 6, 6), dtype=local.dtype)
    np.add.at(full, positions, local)
    return _scatter(full, space, space)


def assemble_boundary_load(space: EdgeSpace, g: BoundaryField, face_mask: Optional[np.ndarray] = None,
                           rule: QuadratureRule = TRI_DEGREE_FIVE) -> np.ndarray:
    """
    Load vector b_a = sum_F int_F g . phi_a for tangential boundary data g

    Args:
        space (EdgeSpace): Edge space over tets that own the boundary faces
        g (BoundaryField): Maps points (N, 3) and outward normals (N, 3) to values (N, 3)
        face_mask (Optional[np.ndarray]): Restricts the sum to the selected boundary faces
        rule (QuadratureRule): Face rule

    Returns:
        np.ndarray: Complex load vector
    """
    mesh = space.mesh
    faces, positions = _boundary_selection(space, face_mask)
    parents = mesh.boundary_parents[faces]
    bary = _face_barycentric(space, mesh.boundary_faces[faces], parents, rule)
    points = mesh.points_from_barycentric(parents[:, None], bary)
    normals = np.broadcast_to(mesh.boundary_normals[faces][:, None, :], points.shape)
    data = np.asarray(g(points.reshape(-1, 3), normals.reshape(-1, 3))).reshape(points.shape)
    values = whitney_values(space.grads[positions], bary)
    local = np.einsum("q,fqai,fqi->fa", rule.normalized_weights, values, data)
    local = local * mesh.boundary_areas[faces][:, None]

    full = np.zeros((len(space.tets), 6), dtype=local.dtype)
    np.add.at(full, positions, local)
    return _scatter_vector(full, space)


def assemble_edge_load(space: EdgeSpace, f: VectorField, rule: QuadratureRule = TET_DEGREE_TWO) -> np.ndarray:
    """Load vector b_a = int f . phi_a over the space's tets"""
    points = space.mesh.points_from_barycentric(space.tets[:, None], np.broadcast_to(
        rule.points, (len(space.tets),) + rule.points.shape))
    data = np.asarray(f(points.reshape(-1, 3))).reshape(points.shape)
    values = space.values(rule.points)
    local = np.einsum("q,tqai,tqi->ta", rule.normalized_weights, values, data) * space.volumes[:, None]
    return _scatter_vector(local, space)


def assemble_constant_load(space: EdgeSpace, direction: np.ndarray, coeff: Coefficient = 1.0) -> np.ndarray:
    """Load vector b_a = int (C e) . phi_a for a constant vector e; exact with the one-point rule"""
    C = tensor_coefficients(space, coeff)
    values = space.values(TET_ONE_POINT.points)[:, 0]
    local = np.einsum("tij,j,tai->ta", C, np.asarray(direction), values) * space.volumes[:, None]
    return _scatter_vector(local, space)


def assemble_constant_curl_load(space: EdgeSpace, direction: np.ndarray, coeff: Coefficient = 1.0) -> np.ndarray:
    """Load vector b_a = int (C e) . curl phi_a for a constant vector e"""
    C = tensor_coefficients(space, coeff)
    local = np.einsum("tij,j,tai->ta", C, np.asarray(direction), space.curls) * space.volumes[:, None]
    return _scatter_vector(local, space)


def assemble_p1_stiffness(space: NodalSpace, coeff: Coefficient = 1.0) -> sp.csr_matrix:
    """P1 stiffness K_ij = sum_T (C_T grad lambda_j) . grad lambda_i |T|"""
    C = tensor_coefficients(space, coeff)
    grads = space.grads
    local = np.einsum("tai,tij,tbj->tab", grads, C, grads) * space.volumes[:, None, None]
    return _scatter(local, space, space)


def assemble_p1_mass(space: NodalSpace, coeff: Coefficient = 1.0) -> sp.csr_matrix:
    """P1 mass matrix with exact element matrices |T| (1 + delta_ij) / 20"""
    scale = tensor_coefficients(space, coeff)[:, 0, 0]
    reference = (np.ones((4, 4)) + np.eye(4)) / 20.0
    local = (scale * space.volumes)[:, None, None] * reference
    return _scatter(local, space, space)


def assemble_p1_load(space: NodalSpace, direction: np.ndarray, coeff: Coefficient = 1.0) -> np.ndarray:
    """Load vector b_i = int (C e) . grad lambda_i for a constant vector e"""
    C = tensor_coefficients(space, coeff)
    return assemble_p1_field_load(space, np.einsum("tij,j->ti", C, np.asarray(direction)))


def assemble_p1_field_load(space: NodalSpace, vectors: np.ndarray) -> np.ndarray:
    """Load vector b_i = sum_T |T| v_T . grad lambda_i for per-tet constant vectors v"""
    vectors = np.asarray(vectors)
    if vectors.shape[0] == space.mesh.n_tets and len(space.tets) != space.mesh.n_tets:
        vectors = vectors[space.tets]
    local = np.einsum("ti,tai->ta", vectors, space.grads) * space.volumes[:, None]
    return _scatter_vector(local, space)


def assemble_gradient_coupling(nodal: NodalSpace, edge: EdgeSpace) -> sp.csr_matrix:
    """
    Coupling C_ia = int grad lambda_i . phi_a

    The integrand is linear, so the barycenter rule is exact.
    """
    values = edge.values(TET_ONE_POINT.points)[:, 0]
    local = np.einsum("tic,tac->tia", nodal.grads, values) * nodal.volumes[:, None, None]
    return _scatter(local, nodal, edge)


def discrete_gradient(nodal: NodalSpace, edge: EdgeSpace) -> sp.csr_matrix:
    """
    Incidence matrix mapping nodal coefficients to the edge dofs of their gradient

    Both spaces must share the mesh and tet selection; eliminated dofs are skipped.
    """
    if not np.array_equal(nodal.tets, edge.tets):
        raise ValueError("Nodal and edge spaces must live on the same tets")
    a = np.array([0, 0, 0, 1, 1, 2])
    b = np.array([1, 2, 3, 2, 3, 3])
    dofs = edge.dof_map.ravel()
    signs = edge.dof_sign.ravel().astype(float)
    va = nodal.dof_map[:, a].ravel()
    vb = nodal.dof_map[:, b].ravel()
    # one occurrence per edge dof; both endpoints added so coinciding vertices cancel
    _, first = np.unique(dofs, return_index=True)
    first = first[dofs[first] >= 0]
    rows = np.concatenate([dofs[first], dofs[first]])
    cols = np.concatenate([vb[first], va[first]])
    vals = np.concatenate([signs[first], -signs[first]])
    keep = cols >= 0
    matrix = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(edge.n_dofs, nodal.n_dofs))
    return as_csr(matrix)
