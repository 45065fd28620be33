import numpy as np
from src.mesh.components import AxisBox, LOCAL_EDGES, StructuredTetMesh, UNIT_CELL

CENTER_BOX = AxisBox((0.25, 0.25, 0.25), (0.75, 0.75, 0.75))
THIRDS_BOX = AxisBox((1 / 3, 1 / 3, 1 / 3), (2 / 3, 2 / 3, 2 / 3))


def constant_field(vector):
    """Callable returning the same vector at every point"""
    vector = np.asarray(vector, dtype=float)
    return lambda points: np.broadcast_to(vector, np.shape(points)).copy()


def reference_tet_mesh():
    """Single tet with vertices 0, e1, e2, e3; local and global edges coincide"""
    return StructuredTetMesh(
        box=UNIT_CELL,
        n_per_axis=1,
        vertices=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        tets=np.array([[0, 1, 2, 3]]),
        edges=np.array(LOCAL_EDGES),
        tet_edges=np.arange(6)[None, :],
        tet_edge_signs=np.ones((1, 6), dtype=np.int8),
        boundary_faces=np.zeros((0, 3), dtype=np.int64),
        boundary_normals=np.zeros((0, 3)),
        boundary_parents=np.zeros(0, dtype=np.int64),
        subdomain_tag=np.zeros(1, dtype=np.int8),
    )
