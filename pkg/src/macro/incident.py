from typing import Callable
import numpy as np
from src.fem.quadrature import QuadratureRule, TRI_DEGREE_FIVE
from src.macro.components import BoundaryTrace, IncidentWave
from src.mesh.components import StructuredTetMesh


def incident_plane_wave(k: float, direction=(1.0, 0.0, 0.0), polarization=(0.0, 1.0, 0.0),
                        amplitude: complex = 1.0) -> IncidentWave:
    """Plane wave u_inc(x) = amplitude * exp(-i k direction . x) * polarization"""
    return IncidentWave(k=float(k), direction=np.asarray(direction, dtype=float),
                        polarization=np.asarray(polarization, dtype=float), amplitude=amplitude)


def impedance_data(u_inc: IncidentWave) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """g(x, n) = curl u_inc x n - i k (n x u_inc) x n, tangential by construction"""

    def g(points: np.ndarray, normals: np.ndarray) -> np.ndarray:
        u = u_inc(points)
        return np.cross(u_inc.curl(points), normals) - 1j * u_inc.k * np.cross(np.cross(normals, u), normals)

    return g


def impedance_trace_g(u_inc: IncidentWave, mesh: StructuredTetMesh,
                      rule: QuadratureRule = TRI_DEGREE_FIVE) -> BoundaryTrace:
    """
    Impedance data on every boundary face of a box mesh

    Args:
        u_inc (IncidentWave): The incident wave
        mesh (StructuredTetMesh): Box mesh with enumerated boundary faces
        rule (QuadratureRule): Face rule giving the sample points

    Returns:
        BoundaryTrace: Points (F, Q, 3), normals (F, 3) and values (F, Q, 3)
    """
    corners = mesh.vertices[mesh.boundary_faces]
    points = np.einsum("qk,fkj->fqj", rule.points, corners)
    normals = np.broadcast_to(mesh.boundary_normals[:, None, :], points.shape)
    values = impedance_data(u_inc)(points.reshape(-1, 3), normals.reshape(-1, 3)).reshape(points.shape)
    return BoundaryTrace(points=points, normals=mesh.boundary_normals, values=values)
