import csv
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Set
import numpy as np
from src.fem.spaces import FieldFunction
from src.hmm.components import ConvergenceReport
from src.macro.components import PlaneSlice
from src.mesh.components import StructuredTetMesh
from src.micro.components import EffectiveTensors, MuSweep

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"
# diagonal entries first, then the off-diagonal ones row by row
TENSOR_ORDER = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1))
SWEEP_HEADER = ["k"] + [f"{part}_mu{i + 1}{j + 1}" for i, j in TENSOR_ORDER for part in ("Re", "Im")]
STUDY_HEADER = ["H", "h", "k", "l2_err", "curl_err", "theta_l2", "eoc_l2", "eoc_curl", "eoc_theta"]
SLICE_HEADER = ["s", "t", "Re_u1", "Im_u1", "Re_u2", "Im_u2", "Re_u3", "Im_u3", "abs_re_u"]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """CSV with a header row, %.9g floats, empty cells for None and \\n line endings"""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.debug("Wrote %s", path)
    return path


def write_sweep_csv(path: Path, sweep: MuSweep) -> Path:
    """One row per wavenumber; failed wavenumbers are written as nan"""
    rows = []
    for r in sweep.rows:
        mu = r.mu_hom if r.mu_hom is not None else np.full((3, 3), complex(np.nan, np.nan))
        values: List[float] = [float(r.k)]
        for i, j in TENSOR_ORDER:
            values.extend([float(mu[i, j].real), float(mu[i, j].imag)])
        rows.append(values)
    return write_csv(path, SWEEP_HEADER, rows)


def write_eps_hom_csv(path: Path, tensors: EffectiveTensors) -> Path:
    """The 3x3 effective inverse permittivity, one tensor row per line"""
    return write_csv(path, ["col1", "col2", "col3"], [[float(v) for v in row] for row in tensors.eps_inv_hom.real])


def write_mu_parts_csv(path: Path, tensors: EffectiveTensors) -> Path:
    """Entries of the static and dynamic parts of mu_hom"""
    rows = []
    for name, part in (("static", tensors.mu_static), ("dynamic", tensors.mu_dynamic), ("total", tensors.mu_hom)):
        if part is None:
            continue
        part = np.asarray(part, dtype=complex)
        rows.extend([name, i + 1, j + 1, float(part[i, j].real), float(part[i, j].imag)] for i, j in TENSOR_ORDER)
    return write_csv(path, ["part", "row", "col", "re", "im"], rows)


def write_resonances(path: Path, sweep: MuSweep) -> Path:
    """Resonance intervals, then band gaps, one interval per line"""
    path = Path(path)
    lines = ["# resonance intervals: k_lo k_hi k_peak peak_im"]
    for r in sweep.resonances:
        lines.append(" ".join(_cell(float(v)) if v is not None else "nan"
                              for v in (r.k_lo, r.k_hi, r.k_peak, r.peak_im)))
    lines.append("# band gaps: k_start k_end")
    lines.extend(f"{_cell(float(a))} {_cell(float(b))}" for a, b in sweep.band_gaps)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_slice_csv(path: Path, plane: PlaneSlice) -> Path:
    rows = []
    for s, t, u in zip(plane.s, plane.t, plane.values):
        rows.append([float(s), float(t), float(u[0].real), float(u[0].imag), float(u[1].real), float(u[1].imag),
                     float(u[2].real), float(u[2].imag), float(np.linalg.norm(u.real))])
    return write_csv(path, SLICE_HEADER, rows)


def vertex_average(field: FieldFunction, mesh: Optional[StructuredTetMesh] = None) -> np.ndarray:
    """(V, 3) field values at the vertices, averaged over the incident tets of the field's region"""
    mesh = mesh or field.space.mesh
    corners = field.values(np.eye(4))
    tets = mesh.tets[field.space.tets]
    total = np.zeros((mesh.n_vertices, 3), dtype=complex)
    count = np.zeros(mesh.n_vertices)
    np.add.at(total, tets.ravel(), corners.reshape(-1, 3))
    np.add.at(count, tets.ravel(), 1.0)
    return total / np.maximum(count, 1.0)[:, None]


def write_vtk(path: Path, field: FieldFunction, title: str = "maxwell-hmm field") -> Path:
    """
    Legacy ASCII VTK 3.0 unstructured grid of an edge field

    Point data: Re_u and Im_u, the vertex averages over incident tets.
    Cell data: subdomain tag.
    """
    path = Path(path)
    mesh = field.space.mesh
    values = vertex_average(field)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    lines.extend(" ".join(FLOAT_FORMAT % c for c in p) for p in mesh.vertices)
    lines.append(f"CELLS {mesh.n_tets} {5 * mesh.n_tets}")
    lines.extend("4 " + " ".join(str(v) for v in tet) for tet in mesh.tets)
    lines.append(f"CELL_TYPES {mesh.n_tets}")
    lines.extend(["10"] * mesh.n_tets)
    lines.append(f"CELL_DATA {mesh.n_tets}")
    lines.append("SCALARS subdomain int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(t)) for t in mesh.subdomain_tag)
    lines.append(f"POINT_DATA {mesh.n_vertices}")
    for name, part in (("Re_u", values.real), ("Im_u", values.imag)):
        lines.append(f"VECTORS {name} double")
        lines.extend(" ".join(FLOAT_FORMAT % c for c in v) for v in part)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug("Wrote VTK file %s", path)
    return path


def _study_rows(report: ConvergenceReport) -> List[list]:
    rows = []
    for index, r in enumerate(report.rows):
        rows.append([r.H, r.h, r.k, r.l2, r.curl_semi, r.theta_l2, *report.row_eocs(index)])
    return rows


def write_study_csv(path: Path, report: ConvergenceReport) -> Path:
    return write_csv(path, STUDY_HEADER, _study_rows(report))


def format_study_table(report: ConvergenceReport) -> str:
    """Aligned table of the study, the EOC cells of the first row left blank"""
    header = ["H", "h", "||e0||", "EOC", "||curl e0||", "EOC", "||theta||", "EOC"]
    body = []
    for r in _study_rows(report):
        H, h, _, l2, curl, theta, eoc_l2, eoc_curl, eoc_theta = r
        body.append([f"{H:.6g}", f"{h:.6g}", f"{l2:.6g}", _eoc_text(eoc_l2), f"{curl:.6g}", _eoc_text(eoc_curl),
                     f"{theta:.6g}", _eoc_text(eoc_theta)])
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _eoc_text(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


class OutputSession:
    """
    Tracks the files a command writes and removes them if the command fails

    Files that appear in the directory during the session without being
    registered, such as matrix dumps, are removed as well. Files that existed
    before the session are left in place, even under a registered name.

    Usage:
        with OutputSession(out_dir) as out:
            write_csv(out.path("table.csv"), ...)
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.written: List[Path] = []
        self._created_dir = False
        self._existing: Set[Path] = set()

    def __enter__(self) -> "OutputSession":
        if not self.out_dir.exists():
            self.out_dir.mkdir(parents=True)
            self._created_dir = True
        self._existing = set(self.out_dir.iterdir())
        return self

    def path(self, name: str) -> Path:
        """Register an output file name and return its path"""
        target = self.out_dir / name
        self.written.append(target)
        return target

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is None:
            return False
        stray = {p for p in self.out_dir.iterdir() if p.is_file()}
        created = (set(self.written) | stray) - self._existing
        for target in created:
            target.unlink(missing_ok=True)
        if self._created_dir and not any(self.out_dir.iterdir()):
            self.out_dir.rmdir()
        logger.info("Removed %d partial output files after failure", len(created))
        return False
