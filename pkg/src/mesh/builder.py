import itertools
import logging
from typing import Optional, Tuple
import numpy as np
from src.errors import AlignmentError, GeometryError
from src.mesh.components import (
    AxisBox, StructuredTetMesh, PeriodicIdentification, UNIT_CELL,
    LOCAL_EDGES, LOCAL_FACES, TAG_INSIDE, TAG_OUTSIDE
)

logger = logging.getLogger(__name__)

ALIGNMENT_TOL = 1e-9


def _kuhn_offsets() -> np.ndarray:
    """Corner offsets (6, 4, 3) of the Kuhn tets of the unit hexahedron, positively oriented"""
    tets = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, dtype=np.int64)]
        for axis in perm:
            step = path[-1].copy()
            step[axis] += 1
            path.append(step)
        # the signed volume equals the sign of the axis permutation
        if np.linalg.det(np.eye(3)[list(perm)]) < 0:
            path[2], path[3] = path[3], path[2]
        tets.append(path)
    return np.asarray(tets)


def _check_alignment(box: AxisBox, n: int, inclusion: AxisBox) -> None:
    if not inclusion.within(box):
        raise GeometryError(f"Inclusion {inclusion} is not contained in {box}")
    spacing = box.side / n
    for bound in (inclusion.lo, inclusion.hi):
        steps = (np.asarray(bound) - np.asarray(box.lo)) / spacing
        if np.any(np.abs(steps - np.round(steps)) > ALIGNMENT_TOL):
            logger.error("Inclusion %s does not lie on the mesh planes of n=%d", inclusion, n)
            raise AlignmentError(
                f"Inclusion bound {bound} is not a multiple of the mesh spacing {tuple(spacing)}"
            )


def _grid_index(n: int, i: np.ndarray, j: np.ndarray, k: np.ndarray) -> np.ndarray:
    return i + (n + 1) * j + (n + 1) * (n + 1) * k


def _grid_coords(n: int, v: np.ndarray) -> np.ndarray:
    return np.stack([v % (n + 1), (v // (n + 1)) % (n + 1), v // ((n + 1) * (n + 1))], axis=-1)


def _boundary_normals(box: AxisBox, points: np.ndarray) -> np.ndarray:
    """Outward axis normals for boundary faces given their corner coordinates (nf, 3, 3)"""
    normals = np.zeros((len(points), 3))
    found = np.zeros(len(points), dtype=bool)
    tol = ALIGNMENT_TOL * float(box.side.max())
    for axis in range(3):
        coords = points[:, :, axis]
        on_lo = np.all(np.abs(coords - box.lo[axis]) < tol, axis=1) & ~found
        normals[on_lo, axis] = -1.0
        found |= on_lo
        on_hi = np.all(np.abs(coords - box.hi[axis]) < tol, axis=1) & ~found
        normals[on_hi, axis] = 1.0
        found |= on_hi
    if not np.all(found):
        raise GeometryError("Boundary face does not lie on a box plane")
    return normals


def build_box_mesh(box: AxisBox, n: int, inclusion: Optional[AxisBox] = None) -> StructuredTetMesh:
    """
    Kuhn 6-tet subdivision of the n x n x n hexahedra of a box

    Args:
        box (AxisBox): The meshed box
        n (int): Subdivisions per axis
        inclusion (Optional[AxisBox]): Subdomain tagged TAG_INSIDE; its faces must lie on mesh planes

    Returns:
        StructuredTetMesh: The tagged mesh with edges and boundary faces enumerated
    """
    if n < 1:
        raise GeometryError(f"Mesh resolution must be at least 1, got {n}")
    if inclusion is not None:
        _check_alignment(box, n, inclusion)

    axis = np.arange(n + 1)
    kk, jj, ii = np.meshgrid(axis, axis, axis, indexing="ij")
    ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
    spacing = box.side / n
    vertices = np.asarray(box.lo) + np.stack([ii, jj, kk], axis=1) * spacing
    # exact coordinates on the far planes
    for a in range(3):
        vertices[np.stack([ii, jj, kk], axis=1)[:, a] == n, a] = box.hi[a]

    cells = np.arange(n)
    hk, hj, hi_ = np.meshgrid(cells, cells, cells, indexing="ij")
    base = _grid_index(n, hi_.ravel(), hj.ravel(), hk.ravel())
    offsets = _kuhn_offsets()
    corner = _grid_index(n, offsets[..., 0], offsets[..., 1], offsets[..., 2])
    tets = (base[:, None, None] + corner[None, :, :]).reshape(-1, 4)

    nv = len(vertices)
    pairs = tets[:, np.asarray(LOCAL_EDGES)]
    signs = np.where(pairs[..., 0] < pairs[..., 1], 1, -1).astype(np.int8)
    lo_v = pairs.min(axis=2)
    hi_v = pairs.max(axis=2)
    codes, inverse = np.unique((lo_v * nv + hi_v).ravel(), return_inverse=True)
    edges = np.stack([codes // nv, codes % nv], axis=1)
    tet_edges = inverse.reshape(-1, 6)

    faces = np.sort(tets[:, np.asarray(LOCAL_FACES)], axis=2).reshape(-1, 3)
    face_codes = (faces[:, 0] * nv + faces[:, 1]) * nv + faces[:, 2]
    _, first, counts = np.unique(face_codes, return_index=True, return_counts=True)
    if np.any(counts > 2):
        raise GeometryError("Non-manifold face in the subdivision")
    boundary = first[counts == 1]
    boundary_faces = faces[boundary]
    boundary_parents = boundary // 4
    normals = _boundary_normals(box, vertices[boundary_faces])

    tags = np.full(len(tets), TAG_OUTSIDE, dtype=np.int8)
    if inclusion is not None:
        barycenters = vertices[tets].mean(axis=1)
        tags[inclusion.contains(barycenters, strict=True)] = TAG_INSIDE

    mesh = StructuredTetMesh(
        box=box,
        n_per_axis=n,
        vertices=vertices,
        tets=tets,
        edges=edges,
        tet_edges=tet_edges,
        tet_edge_signs=signs,
        boundary_faces=boundary_faces,
        boundary_normals=normals,
        boundary_parents=boundary_parents,
        subdomain_tag=tags,
        inclusion=inclusion,
    )
    logger.debug("Built box mesh: %d vertices, %d edges, %d tets", nv, len(edges), len(tets))
    return mesh


def build_periodic_cell_mesh(
    n: int,
    inclusion: Optional[AxisBox] = None
) -> Tuple[StructuredTetMesh, PeriodicIdentification]:
    """
    Mesh of the unit cell [0, 1)^3 with its periodic identification

    Args:
        n (int): Subdivisions per axis
        inclusion (Optional[AxisBox]): The inclusion, compactly contained in the cell

    Returns:
        Tuple[StructuredTetMesh, PeriodicIdentification]: The cell mesh and its wrap maps
    """
    if inclusion is not None and not inclusion.strictly_inside(UNIT_CELL):
        logger.error("Inclusion %s touches the cell boundary", inclusion)
        raise GeometryError(f"Inclusion {inclusion} must lie strictly inside the unit cell")
    mesh = build_box_mesh(UNIT_CELL, n, inclusion)

    grid = _grid_coords(n, np.arange(mesh.n_vertices))
    wrapped = grid % n
    vertex_map = _grid_index(n, wrapped[:, 0], wrapped[:, 1], wrapped[:, 2])

    # Kuhn edges point into the positive octant, so the class of an edge is
    # fixed by its wrapped low vertex and its direction
    direction = grid[mesh.edges[:, 1]] - grid[mesh.edges[:, 0]]
    low = vertex_map[mesh.edges[:, 0]]
    high = low + _grid_index(n, direction[:, 0], direction[:, 1], direction[:, 2])
    nv = mesh.n_vertices
    codes = mesh.edges[:, 0] * nv + mesh.edges[:, 1]
    rep_codes = low * nv + high
    edge_map = np.searchsorted(codes, rep_codes)
    if np.any(codes[edge_map] != rep_codes):
        raise GeometryError("Periodic edge representative missing from the mesh")
    edge_sign = np.where(high > low, 1, -1).astype(np.int8)

    identification = PeriodicIdentification(vertex_map=vertex_map, edge_map=edge_map, edge_sign=edge_sign)
    logger.debug(
        "Periodic cell mesh n=%d: %d representative vertices, %d representative edges",
        n, identification.n_representative_vertices, identification.n_representative_edges
    )
    return mesh, identification


def boundary_outward_normals(mesh: StructuredTetMesh) -> np.ndarray:
    """Unit outward normals of the boundary faces, one of +-e1, +-e2, +-e3"""
    return mesh.boundary_normals
