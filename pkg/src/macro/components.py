from dataclasses import dataclass, field, replace
from typing import Optional
import numpy as np
from src.errors import ConfigError, GeometryError
from src.fem.spaces import FieldFunction
from src.linalg.components import SolverReport
from src.mesh.components import AxisBox, StructuredTetMesh
from src.micro.components import EffectiveTensors

UNIT_TOL = 1e-9


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave amplitude * exp(-i k direction . x) * polarization"""
    k: float
    direction: np.ndarray
    polarization: np.ndarray
    amplitude: complex = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        p = np.asarray(self.polarization, dtype=float)
        if d.shape != (3,) or p.shape != (3,):
            raise ConfigError("direction and polarization must be 3-vectors")
        if abs(np.linalg.norm(d) - 1.0) > UNIT_TOL or abs(np.linalg.norm(p) - 1.0) > UNIT_TOL:
            raise ConfigError("direction and polarization must be unit vectors")
        if abs(float(d @ p)) > UNIT_TOL:
            raise ConfigError("polarization must be orthogonal to the direction")
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "polarization", p)
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    def _phase(self, points: np.ndarray) -> np.ndarray:
        return self.amplitude * np.exp(-1j * self.k * (np.asarray(points) @ self.direction))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Field values (N, 3) at points (N, 3)"""
        return self._phase(points)[..., None] * self.polarization

    def curl(self, points: np.ndarray) -> np.ndarray:
        """-i k (direction x polarization) u"""
        return -1j * self.k * self._phase(points)[..., None] * np.cross(self.direction, self.polarization)


@dataclass
class ScatterConfig:
    """Scattering setup: domain G, scatterer Omega, wavenumber, incident wave and effective tensors in Omega"""
    G: AxisBox
    Omega: AxisBox
    k: float
    incident: IncidentWave
    tensors: Optional[EffectiveTensors] = None

    def __post_init__(self):
        if not self.Omega.strictly_inside(self.G):
            raise GeometryError(f"Omega {self.Omega} must lie strictly inside G {self.G}")
        if self.k <= 0:
            raise ConfigError(f"The wavenumber must be positive, got {self.k}")

    def with_tensors(self, tensors: EffectiveTensors) -> "ScatterConfig":
        return ScatterConfig(G=self.G, Omega=self.Omega, k=self.k, incident=self.incident, tensors=tensors)

    def at_wavenumber(self, k: float) -> "ScatterConfig":
        """Same setup at wavenumber k; the incident wave follows, the tensors are dropped"""
        if k == self.k:
            return self
        return ScatterConfig(G=self.G, Omega=self.Omega, k=k, incident=replace(self.incident, k=float(k)))


@dataclass(frozen=True)
class EnergyBalance:
    """Imaginary parts of the sesquilinear form at the solution, split by term

    Each loss is non-positive for passive coefficients; their sum must match
    the imaginary part of the impedance flux u^H b.
    """
    curl_loss: float
    absorption: float
    impedance_loss: float
    flux: float

    @property
    def total(self) -> float:
        return self.curl_loss + self.absorption + self.impedance_loss

    @property
    def defect(self) -> float:
        scale = max(abs(self.flux), abs(self.impedance_loss), abs(self.absorption), abs(self.curl_loss))
        return abs(self.total - self.flux) / (scale if scale > 0 else 1.0)


@dataclass(eq=False)
class MacroSolution:
    """Edge-element solution of the effective scattering problem"""
    u_H: FieldFunction
    k: float
    mesh: StructuredTetMesh
    report: SolverReport
    energy_defect: float = 0.0
    tensors: Optional[EffectiveTensors] = None
    energy: Optional[EnergyBalance] = None

    @property
    def H(self) -> float:
        return self.mesh.diameter

    @property
    def n_per_axis(self) -> int:
        return self.mesh.n_per_axis


@dataclass
class BoundaryTrace:
    """Boundary data sampled at face quadrature points"""
    points: np.ndarray
    normals: np.ndarray
    values: np.ndarray


@dataclass
class PlaneSlice:
    """Field samples at the barycenters of a regular grid of cells on an axis plane"""
    axis: int
    offset: float
    s: np.ndarray
    t: np.ndarray
    values: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=complex))
