from dataclasses import dataclass
from typing import Callable, Optional, Tuple
import numpy as np
from src.fem.assembly import assemble_boundary_tangential_mass, assemble_curlcurl, assemble_mass
from src.fem.quadrature import TET_DEGREE_TWO, QuadratureRule
from src.fem.spaces import EdgeSpace, FieldFunction


@dataclass
class WeightedNorms:
    """Ingredients of the k-weighted energy norms"""
    l2: float
    curl_semi: float
    imp_boundary: float
    k: float

    @property
    def curl_k(self) -> float:
        """(||curl v||^2 + k^2 ||v||^2)^(1/2)"""
        return float(np.sqrt(self.curl_semi ** 2 + self.k ** 2 * self.l2 ** 2))

    @property
    def imp_k(self) -> float:
        """(||curl v||^2 + k^2 ||v||^2 + k ||v_T||^2 on the boundary)^(1/2)"""
        return float(np.sqrt(self.curl_semi ** 2 + self.k ** 2 * self.l2 ** 2 + self.k * self.imp_boundary ** 2))


def _quadratic_form(matrix, x: np.ndarray) -> float:
    return float(max(np.real(np.vdot(x, matrix @ x)), 0.0))


def weighted_norms(u: FieldFunction, k: float, region: Optional[int] = None) -> WeightedNorms:
    """
    L2 norm, curl seminorm and boundary tangential L2 norm of an edge field

    Args:
        u (FieldFunction): Field on an EdgeSpace
        k (float): Wavenumber weighting the L2 part
        region (Optional[int]): Restrict to tets with this subdomain tag

    Returns:
        WeightedNorms: The three norms, evaluated through the assembled matrices
    """
    space = u.space
    if not isinstance(space, EdgeSpace):
        raise TypeError("weighted_norms needs a field on an EdgeSpace")
    mask = np.ones(len(space.tets))
    face_mask = None
    if region is not None:
        mask = (space.mesh.subdomain_tag[space.tets] == region).astype(float)
        face_mask = space.mesh.subdomain_tag[space.mesh.boundary_parents] == region
    x = u.coefficients
    l2 = np.sqrt(_quadratic_form(assemble_mass(space, mask), x))
    curl = np.sqrt(_quadratic_form(assemble_curlcurl(space, mask), x))
    boundary = np.sqrt(_quadratic_form(assemble_boundary_tangential_mass(space, face_mask), x))
    return WeightedNorms(l2=float(l2), curl_semi=float(curl), imp_boundary=float(boundary), k=float(k))


def impedance_energy_norm(u: FieldFunction, k: float) -> float:
    """The impedance energy norm ||u||_{imp;k} over the whole mesh"""
    return weighted_norms(u, k).imp_k


def analytic_errors(
    u: FieldFunction,
    field: Callable[[np.ndarray], np.ndarray],
    curl_field: Callable[[np.ndarray], np.ndarray],
    rule: QuadratureRule = TET_DEGREE_TWO
) -> Tuple[float, float]:
    """
    L2 and curl errors of a discrete field against an analytic field and its curl

    Returns:
        Tuple[float, float]: ||u - field|| and ||curl u - curl_field||
    """
    space = u.space
    mesh = space.mesh
    n_tets = len(space.tets)
    bary = np.broadcast_to(rule.points, (n_tets,) + rule.points.shape)
    points = mesh.points_from_barycentric(space.tets[:, None], bary).reshape(-1, 3)
    weights = rule.normalized_weights[None, :] * space.volumes[:, None]

    diff = u.values(rule.points) - np.asarray(field(points)).reshape(n_tets, -1, 3)
    curl_diff = u.curls()[:, None, :] - np.asarray(curl_field(points)).reshape(n_tets, -1, 3)
    l2 = np.sqrt(np.sum(weights * np.sum(np.abs(diff) ** 2, axis=2)))
    curl = np.sqrt(np.sum(weights * np.sum(np.abs(curl_diff) ** 2, axis=2)))
    return float(l2), float(curl)
