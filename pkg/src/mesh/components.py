from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple
import numpy as np
from src.errors import GeometryError

TAG_OUTSIDE = 0
TAG_INSIDE = 1

# Local edge (a, b) of a tet runs from local vertex a to local vertex b
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
# Local face i is opposite local vertex i
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


@dataclass(frozen=True)
class AxisBox:
    """Axis-aligned box (lo, hi)"""
    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(c) for c in self.lo)
        hi = tuple(float(c) for c in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise GeometryError(f"Box corners must be 3-vectors, got {self.lo} and {self.hi}")
        if not all(l < h for l, h in zip(lo, hi)):
            raise GeometryError(f"Box requires lo < hi on every axis, got {lo} and {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def side(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.side))

    def contains(self, points: np.ndarray, strict: bool = True) -> np.ndarray:
        """Membership test for an (N, 3) array of points"""
        points = np.atleast_2d(points)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        if strict:
            return np.all((points > lo) & (points < hi), axis=1)
        return np.all((points >= lo) & (points <= hi), axis=1)

    def strictly_inside(self, other: "AxisBox") -> bool:
        """True if this box lies in the interior of `other`"""
        return all(ol < l for ol, l in zip(other.lo, self.lo)) and \
            all(h < oh for h, oh in zip(self.hi, other.hi))

    def within(self, other: "AxisBox") -> bool:
        return all(ol <= l for ol, l in zip(other.lo, self.lo)) and \
            all(h <= oh for h, oh in zip(self.hi, other.hi))


UNIT_CELL = AxisBox((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


@dataclass(frozen=True, eq=False)
class StructuredTetMesh:
    """Kuhn-subdivided tetrahedral mesh of an axis-aligned box"""
    box: AxisBox
    n_per_axis: int
    vertices: np.ndarray
    tets: np.ndarray
    edges: np.ndarray
    tet_edges: np.ndarray
    tet_edge_signs: np.ndarray
    boundary_faces: np.ndarray
    boundary_normals: np.ndarray
    boundary_parents: np.ndarray
    subdomain_tag: np.ndarray
    inclusion: object = field(default=None)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def spacing(self) -> np.ndarray:
        return self.box.side / self.n_per_axis

    @property
    def diameter(self) -> float:
        """Largest tet diameter; the body diagonal of one hexahedron"""
        return float(np.linalg.norm(self.spacing))

    @cached_property
    def _geometry(self) -> Tuple[np.ndarray, np.ndarray]:
        corners = self.vertices[self.tets]
        jac = corners[:, 1:, :] - corners[:, :1, :]
        det = np.linalg.det(jac)
        inv = np.linalg.inv(jac)
        grads = np.empty((self.n_tets, 4, 3))
        # rows of jac are edge vectors, so grad(lambda_i) is column i-1 of its inverse
        grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        return det / 6.0, grads

    @property
    def volumes(self) -> np.ndarray:
        """Signed tet volumes (positive by construction)"""
        return self._geometry[0]

    @property
    def barycentric_gradients(self) -> np.ndarray:
        """(n_tets, 4, 3) gradients of the barycentric coordinates"""
        return self._geometry[1]

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.tets].mean(axis=1)

    @cached_property
    def edge_tangents(self) -> np.ndarray:
        """Edge vectors from the lower to the higher vertex index"""
        return self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]

    @cached_property
    def boundary_areas(self) -> np.ndarray:
        p = self.vertices[self.boundary_faces]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def tets_with_tag(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.subdomain_tag == tag)

    def points_from_barycentric(self, tet_ids: np.ndarray, bary: np.ndarray) -> np.ndarray:
        """Physical points for barycentric coordinates `bary` ((..., 4)) in tets `tet_ids`"""
        corners = self.vertices[self.tets[tet_ids]]
        return np.einsum("...i,...ij->...j", bary, corners)

    def locate(self, points: np.ndarray, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
        """
        Find the tet containing each point.

        Args:
            points (np.ndarray): (N, 3) points inside the box (closed)
            tol (float): Slack on barycentric coordinates for points on faces

        Returns:
            Tuple[np.ndarray, np.ndarray]: tet indices (N,) and barycentric coordinates (N, 4)
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        slack = tol * float(self.box.side.max())
        if np.any(points < np.asarray(self.box.lo) - slack) or np.any(points > np.asarray(self.box.hi) + slack):
            raise GeometryError("Cannot locate points outside the meshed box")
        n = self.n_per_axis
        cell = np.floor((points - np.asarray(self.box.lo)) / self.spacing).astype(np.int64)
        cell = np.clip(cell, 0, n - 1)
        hexes = cell[:, 0] + n * cell[:, 1] + n * n * cell[:, 2]
        candidates = 6 * hexes[:, None] + np.arange(6)[None, :]
        x0 = self.vertices[self.tets[candidates, 0]]
        grads = self.barycentric_gradients[candidates]
        lam = np.einsum("nckj,ncj->nck", grads[:, :, 1:, :], points[:, None, :] - x0)
        bary = np.concatenate([1.0 - lam.sum(axis=2, keepdims=True), lam], axis=2)
        best = np.argmax(bary.min(axis=2), axis=1)
        rows = np.arange(len(points))
        if np.any(bary[rows, best].min(axis=1) < -tol):
            raise GeometryError("Point location failed; the point is not in any candidate tet")
        return candidates[rows, best], bary[rows, best]

    def summary(self) -> str:
        """Plain-text mesh statistics"""
        tags, counts = np.unique(self.subdomain_tag, return_counts=True)
        histogram = ", ".join(f"tag {t}: {c}" for t, c in zip(tags, counts))
        return "\n".join([
            f"box: {self.box.lo} -> {self.box.hi}, n = {self.n_per_axis}",
            f"vertices: {self.n_vertices}",
            f"edges: {self.n_edges}",
            f"tets: {self.n_tets}",
            f"boundary faces: {len(self.boundary_faces)}",
            f"tet volume: min {self.volumes.min():.6g}, max {self.volumes.max():.6g}",
            f"subdomains: {histogram}",
        ])


@dataclass(frozen=True, eq=False)
class PeriodicIdentification:
    """Wraps opposite faces of the unit cell onto each other"""
    vertex_map: np.ndarray
    edge_map: np.ndarray
    edge_sign: np.ndarray

    @property
    def representative_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.vertex_map == np.arange(len(self.vertex_map)))

    @property
    def representative_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_map == np.arange(len(self.edge_map)))

    @property
    def n_representative_vertices(self) -> int:
        return len(self.representative_vertices)

    @property
    def n_representative_edges(self) -> int:
        return len(self.representative_edges)
