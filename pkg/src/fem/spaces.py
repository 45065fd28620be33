import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Optional
import numpy as np
from src.errors import GeometryError
from src.fem.basis import whitney_curls, whitney_values
from src.mesh.components import StructuredTetMesh, PeriodicIdentification, LOCAL_FACES

logger = logging.getLogger(__name__)

EdgeFlavor = Literal["unconstrained", "zero_tangential_trace", "periodic_quotient"]
NodalFlavor = Literal["unconstrained", "periodic_zero_mean", "zero_boundary"]


def _select_tets(mesh: StructuredTetMesh, region: Optional[int]) -> np.ndarray:
    if region is None:
        return np.arange(mesh.n_tets)
    return mesh.tets_with_tag(region)


def region_boundary_faces(mesh: StructuredTetMesh, tets: np.ndarray) -> np.ndarray:
    """(F, 3) sorted vertex triples of the faces bounding the union of `tets`"""
    faces = np.sort(mesh.tets[tets][:, np.asarray(LOCAL_FACES)], axis=2).reshape(-1, 3)
    if len(faces) == 0:
        return faces
    nv = mesh.n_vertices
    codes = (faces[:, 0] * nv + faces[:, 1]) * nv + faces[:, 2]
    _, first, counts = np.unique(codes, return_index=True, return_counts=True)
    return faces[first[counts == 1]]


def edge_indices(mesh: StructuredTetMesh, pairs: np.ndarray) -> np.ndarray:
    """Global edge index of each (a, b) vertex pair"""
    nv = mesh.n_vertices
    pairs = np.sort(pairs, axis=1)
    codes = mesh.edges[:, 0] * nv + mesh.edges[:, 1]
    lookup = pairs[:, 0] * nv + pairs[:, 1]
    idx = np.searchsorted(codes, lookup)
    if np.any(idx >= len(codes)) or np.any(codes[np.minimum(idx, len(codes) - 1)] != lookup):
        raise GeometryError("Vertex pair is not an edge of the mesh")
    return idx


class _Space:
    """Shared bookkeeping of the finite-element spaces"""
    mesh: StructuredTetMesh
    tets: np.ndarray
    dof_map: np.ndarray
    dof_sign: np.ndarray
    n_dofs: int

    @cached_property
    def tet_position(self) -> np.ndarray:
        """Position of every mesh tet in this space's selection, -1 if unselected"""
        position = np.full(self.mesh.n_tets, -1, dtype=np.int64)
        position[self.tets] = np.arange(len(self.tets))
        return position

    @property
    def volumes(self) -> np.ndarray:
        return self.mesh.volumes[self.tets]

    @property
    def grads(self) -> np.ndarray:
        return self.mesh.barycentric_gradients[self.tets]

    def localize(self, coefficients: np.ndarray) -> np.ndarray:
        """Signed local coefficients (T, n_local); eliminated dofs contribute zero"""
        coefficients = np.asarray(coefficients)
        safe = np.where(self.dof_map >= 0, self.dof_map, 0)
        return np.where(self.dof_map >= 0, coefficients[safe] * self.dof_sign, 0)


class EdgeSpace(_Space):
    """
    Lowest-order edge elements on the tets of one region

    The global dof of an edge is the tangential moment along the edge oriented
    from its lower to its higher vertex index.
    """

    def __init__(
        self,
        mesh: StructuredTetMesh,
        flavor: EdgeFlavor = "unconstrained",
        region: Optional[int] = None,
        identification: Optional[PeriodicIdentification] = None
    ):
        if flavor == "periodic_quotient" and identification is None:
            raise ValueError("periodic_quotient needs a PeriodicIdentification")
        self.mesh = mesh
        self.flavor = flavor
        self.region = region
        self.identification = identification
        self.tets = _select_tets(mesh, region)

        local_edges = mesh.tet_edges[self.tets]
        used = np.unique(local_edges)
        if flavor == "periodic_quotient":
            representative = identification.edge_map
            orientation = identification.edge_sign.astype(np.int8)
        else:
            representative = np.arange(mesh.n_edges)
            orientation = np.ones(mesh.n_edges, dtype=np.int8)

        keep = np.zeros(mesh.n_edges, dtype=bool)
        keep[used] = True
        if flavor == "zero_tangential_trace":
            faces = region_boundary_faces(mesh, self.tets)
            on_boundary = edge_indices(mesh, np.concatenate([faces[:, [0, 1]], faces[:, [0, 2]], faces[:, [1, 2]]]))
            keep[on_boundary] = False

        self.dof_edges = np.unique(representative[keep])
        self.n_dofs = len(self.dof_edges)
        dof_of_rep = np.full(mesh.n_edges, -1, dtype=np.int64)
        dof_of_rep[self.dof_edges] = np.arange(self.n_dofs)
        self.edge_dof = np.where(keep, dof_of_rep[representative], -1)
        self.edge_sign = orientation

        self.dof_map = self.edge_dof[local_edges]
        self.dof_sign = (mesh.tet_edge_signs[self.tets] * orientation[local_edges]).astype(np.int8)
        logger.debug("EdgeSpace(%s, region=%s): %d dofs on %d tets", flavor, region, self.n_dofs,
                     len(self.tets))

    @cached_property
    def curls(self) -> np.ndarray:
        """(T, 6, 3) signed-local curls of the basis functions"""
        return whitney_curls(self.grads)

    def values(self, bary: np.ndarray) -> np.ndarray:
        """(T, Q, 6, 3) basis values at barycentric points"""
        return whitney_values(self.grads, bary)


class NodalSpace(_Space):
    """Continuous piecewise linear elements on the tets of one region"""

    def __init__(
        self,
        mesh: StructuredTetMesh,
        flavor: NodalFlavor = "unconstrained",
        region: Optional[int] = None,
        identification: Optional[PeriodicIdentification] = None
    ):
        if flavor == "periodic_zero_mean" and identification is None:
            raise ValueError("periodic_zero_mean needs a PeriodicIdentification")
        self.mesh = mesh
        self.flavor = flavor
        self.region = region
        self.identification = identification
        self.tets = _select_tets(mesh, region)

        local_vertices = mesh.tets[self.tets]
        representative = identification.vertex_map if flavor == "periodic_zero_mean" \
            else np.arange(mesh.n_vertices)
        keep = np.zeros(mesh.n_vertices, dtype=bool)
        keep[np.unique(local_vertices)] = True
        if flavor == "zero_boundary":
            keep[np.unique(region_boundary_faces(mesh, self.tets))] = False

        self.dof_vertices = np.unique(representative[keep])
        self.n_dofs = len(self.dof_vertices)
        dof_of_rep = np.full(mesh.n_vertices, -1, dtype=np.int64)
        dof_of_rep[self.dof_vertices] = np.arange(self.n_dofs)
        self.vertex_dof = np.where(keep, dof_of_rep[representative], -1)
        self.dof_map = self.vertex_dof[local_vertices]
        self.dof_sign = np.ones_like(self.dof_map, dtype=np.int8)
        logger.debug("NodalSpace(%s, region=%s): %d dofs on %d tets", flavor, region, self.n_dofs,
                     len(self.tets))

    def values(self, bary: np.ndarray) -> np.ndarray:
        """(T, Q, 4) basis values at barycentric points"""
        if bary.ndim == 2:
            bary = np.broadcast_to(bary, (len(self.tets),) + bary.shape)
        return bary


@dataclass
class FieldFunction:
    """A discrete field: a space and its complex coefficient vector"""
    space: _Space
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients)
        if self.coefficients.shape != (self.space.n_dofs,):
            raise ValueError(
                f"Coefficient length {self.coefficients.shape} does not match {self.space.n_dofs} dofs"
            )

    @property
    def is_edge_field(self) -> bool:
        return isinstance(self.space, EdgeSpace)

    def values(self, bary: np.ndarray) -> np.ndarray:
        """Field values (T, Q, 3) for edge fields, (T, Q) for nodal fields"""
        local = self.space.localize(self.coefficients)
        basis = self.space.values(bary)
        if self.is_edge_field:
            return np.einsum("ta,tqai->tqi", local, basis)
        return np.einsum("ta,tqa->tq", local, basis)

    def curls(self) -> np.ndarray:
        """(T, 3) constant curl per tet of an edge field"""
        return np.einsum("ta,tai->ti", self.space.localize(self.coefficients), self.space.curls)

    def gradients(self) -> np.ndarray:
        """(T, 3) constant gradient per tet of a nodal field"""
        return np.einsum("ta,tai->ti", self.space.localize(self.coefficients), self.space.grads)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values at physical points; zero outside the space's region"""
        points = np.atleast_2d(points)
        tet_ids, bary = self.space.mesh.locate(points)
        position = self.space.tet_position[tet_ids]
        inside = position >= 0
        shape = (len(points), 3) if self.is_edge_field else (len(points),)
        out = np.zeros(shape, dtype=np.result_type(self.coefficients.dtype, float))
        if not np.any(inside):
            return out
        pos = position[inside]
        local = self.space.localize(self.coefficients)[pos]
        b = bary[inside]
        if self.is_edge_field:
            basis = whitney_values(self.space.grads[pos], b[:, None, :])[:, 0]
            out[inside] = np.einsum("na,nai->ni", local, basis)
        else:
            out[inside] = np.einsum("na,na->n", local, b)
        return out
