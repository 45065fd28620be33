from typing import List, Literal, Optional
import numpy as np
from pydantic import BaseModel, Field, validator
from src.macro.components import IncidentWave, ScatterConfig
from src.mesh.components import AxisBox
from src.micro.components import MicroCoefficients

# pylint: disable=no-self-argument,missing-function-docstring,missing-class-docstring


def _complex(pair: List[float]) -> complex:
    return complex(pair[0], pair[1])


class StrictModel(BaseModel):
    class Config:
        extra = "forbid"


class BoxSettings(StrictModel):
    lo: List[float]
    hi: List[float]

    @validator('hi')
    def validate_corners(cls, v, values):
        lo = values.get('lo')
        if lo is None or len(lo) != 3 or len(v) != 3:
            raise ValueError("Box corners must be 3-vectors")
        if not all(l < h for l, h in zip(lo, v)):
            raise ValueError("Box requires lo < hi on every axis")
        return v

    def to_box(self) -> AxisBox:
        return AxisBox(tuple(self.lo), tuple(self.hi))


class MicroSettings(StrictModel):
    inclusion: Optional[BoxSettings] = Field(
        default_factory=lambda: BoxSettings(lo=[0.25, 0.25, 0.25], hi=[0.75, 0.75, 0.75])
    )
    eps0_inv: float = 1.0
    eps1_inv: List[float] = [1.0, -0.01]
    mesh_n: int = 12

    @validator('eps0_inv')
    def validate_eps0(cls, v):
        if v <= 0:
            raise ValueError("eps0_inv must be positive")
        return v

    @validator('eps1_inv')
    def validate_eps1(cls, v):
        if len(v) != 2:
            raise ValueError("eps1_inv is written as [re, im]")
        if v[1] >= 0:
            raise ValueError("eps1_inv needs a negative imaginary part (dissipative inclusion)")
        return v

    @validator('mesh_n')
    def validate_mesh_n(cls, v):
        if v < 1:
            raise ValueError("mesh_n must be at least 1")
        return v

    @property
    def eps1_inv_complex(self) -> complex:
        return _complex(self.eps1_inv)

    def inclusion_box(self) -> Optional[AxisBox]:
        return self.inclusion.to_box() if self.inclusion is not None else None

    def to_coefficients(self) -> MicroCoefficients:
        return MicroCoefficients(eps0_inv=self.eps0_inv, eps1_inv=self.eps1_inv_complex)


class SweepSettings(StrictModel):
    k_min: float = 5.0
    k_max: float = 25.0
    dk: float = 0.1
    k_grid: Optional[List[float]] = None
    merge_gap: float = 1.0
    peak_factor: float = 3.0
    min_peak_fraction: float = 0.05

    @validator('k_grid')
    def validate_grid(cls, v):
        if v is not None:
            if len(v) == 0:
                raise ValueError("k_grid must not be empty")
            if any(b <= a for a, b in zip(v, v[1:])):
                raise ValueError("k_grid must be strictly increasing")
            if v[0] <= 0:
                raise ValueError("wavenumbers must be positive")
        return v

    @validator('k_min')
    def validate_k_min(cls, v):
        if v <= 0:
            raise ValueError("k_min must be positive")
        return v

    @validator('dk')
    def validate_dk(cls, v):
        if v <= 0:
            raise ValueError("dk must be positive")
        return v

    @validator('k_max')
    def validate_range(cls, v, values):
        if 'k_min' in values and v < values['k_min']:
            raise ValueError("k_max must not be below k_min")
        return v

    def grid(self) -> List[float]:
        if self.k_grid is not None:
            return list(self.k_grid)
        count = int(np.floor((self.k_max - self.k_min) / self.dk + 1e-9)) + 1
        return [round(self.k_min + i * self.dk, 12) for i in range(count)]


class IncidentSettings(StrictModel):
    direction: List[float] = [1.0, 0.0, 0.0]
    polarization: List[float] = [0.0, 1.0, 0.0]
    amplitude: List[float] = [1.0, 0.0]

    @validator('polarization')
    def validate_polarization(cls, v, values):
        d = values.get('direction')
        if d is None or len(d) != 3 or len(v) != 3:
            raise ValueError("direction and polarization must be 3-vectors")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9 or abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("direction and polarization must be unit vectors")
        if abs(float(np.dot(d, v))) > 1e-9:
            raise ValueError("polarization must be orthogonal to the direction")
        return v


class ScatterSettings(StrictModel):
    G: BoxSettings = Field(default_factory=lambda: BoxSettings(lo=[0.0, 0.0, 0.0], hi=[1.0, 1.0, 1.0]))
    Omega: BoxSettings = Field(
        default_factory=lambda: BoxSettings(lo=[0.25, 0.25, 0.25], hi=[0.75, 0.75, 0.75])
    )
    k: float = 12.0
    mesh_n: int = 8
    delta: float = 0.0625
    incident: IncidentSettings = Field(default_factory=IncidentSettings)
    slice_axis: int = 1
    slice_offset: float = 0.545
    slice_resolution: int = 40

    @validator('k', 'delta')
    def validate_positive(cls, v):
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @validator('mesh_n', 'slice_resolution')
    def validate_resolution(cls, v):
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @validator('slice_axis')
    def validate_axis(cls, v):
        if v not in (0, 1, 2):
            raise ValueError("slice_axis must be 0, 1 or 2")
        return v

    @validator('Omega')
    def validate_omega(cls, v, values):
        G = values.get('G')
        if G is not None and not v.to_box().strictly_inside(G.to_box()):
            raise ValueError("Omega must lie strictly inside G")
        return v

    def to_scatter_config(self, k: Optional[float] = None) -> ScatterConfig:
        k = self.k if k is None else k
        incident = IncidentWave(
            k=k,
            direction=np.asarray(self.incident.direction, dtype=float),
            polarization=np.asarray(self.incident.polarization, dtype=float),
            amplitude=_complex(self.incident.amplitude),
        )
        return ScatterConfig(G=self.G.to_box(), Omega=self.Omega.to_box(), k=k, incident=incident)


class StudySettings(StrictModel):
    mesh_ns: List[int] = [4, 8, 12]
    reference_macro_n: Optional[int] = 24
    reference_micro_n: Optional[int] = 12

    @validator('mesh_ns')
    def validate_meshes(cls, v):
        if len(v) == 0 or min(v) < 1:
            raise ValueError("mesh_ns needs at least one resolution >= 1")
        return v


class SolverSettings(StrictModel):
    kind: Literal["direct", "gmres"] = "direct"
    ordering: Literal["MMD_AT_PLUS_A", "COLAMD", "MMD_ATA", "NATURAL"] = "MMD_AT_PLUS_A"
    rtol: float = 1e-10
    maxit: int = 2000
    restart: int = 100
    cg_tol: float = 1e-10
    cg_maxit: int = 20000

    @validator('maxit', 'restart', 'cg_maxit')
    def validate_counts(cls, v):
        if v < 1:
            raise ValueError("iteration counts must be at least 1")
        return v


class AppConfig(StrictModel):
    micro: MicroSettings = Field(default_factory=MicroSettings)
    sweep: SweepSettings = Field(default_factory=SweepSettings)
    scatter: ScatterSettings = Field(default_factory=ScatterSettings)
    study: StudySettings = Field(default_factory=StudySettings)
    solver: SolverSettings = Field(default_factory=SolverSettings)
