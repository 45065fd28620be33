import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple
import numpy as np
from tqdm import tqdm
from src.config.settings import SolverSettings, SweepSettings
from src.errors import ConfigError, SolverError
from src.mesh.components import StructuredTetMesh, PeriodicIdentification
from src.micro.cell_problems import (
    build_cell_operators, compute_mu_hom, solve_cell1, solve_cell2, solve_cell3, static_permeability
)
from src.micro.components import CellSolutions, MicroCoefficients, MuSweep, ResonanceInterval, SweepRow

logger = logging.getLogger(__name__)


def _check_grid(k_grid: Sequence[float]) -> np.ndarray:
    ks = np.asarray(k_grid, dtype=float)
    if ks.ndim != 1 or len(ks) == 0:
        raise ConfigError("The wavenumber grid must be a non-empty list")
    if np.any(np.diff(ks) <= 0):
        logger.error("Wavenumber grid is not strictly increasing")
        raise ConfigError("The wavenumber grid must be strictly increasing")
    return ks


def sweep_mu(
    mesh: StructuredTetMesh,
    identification: PeriodicIdentification,
    coefficients: MicroCoefficients,
    k_grid: Sequence[float],
    settings: Optional[SweepSettings] = None,
    solver_settings: Optional[SolverSettings] = None,
    threads: int = 1,
    progress: Optional[bool] = None
) -> MuSweep:
    """
    Effective permeability over a wavenumber grid

    Cell problems 1 and 2 are solved once; cell problem 3 is factorized per k.
    A failed wavenumber is recorded on its row instead of aborting the sweep.

    Args:
        mesh (StructuredTetMesh): Periodic cell mesh with inclusion tags
        identification (PeriodicIdentification): Its periodic wrap maps
        coefficients (MicroCoefficients): Cell coefficients
        k_grid (Sequence[float]): Strictly increasing wavenumbers
        settings (Optional[SweepSettings]): Resonance detector parameters
        solver_settings (Optional[SolverSettings]): Linear solver parameters
        threads (int): Worker threads; rows are merged in grid order
        progress (Optional[bool]): Show a progress bar; defaults to whether stderr is a terminal

    Returns:
        MuSweep: Rows, static permeability, resonance intervals and band gaps
    """
    ks = _check_grid(k_grid)
    settings = settings or SweepSettings()
    ops = build_cell_operators(mesh, identification, coefficients)
    cells = CellSolutions(
        operators=ops,
        cell1=solve_cell1(mesh, identification, coefficients, solver_settings, ops),
        cell2=solve_cell2(mesh, identification, coefficients, solver_settings, ops),
    )

    def row(k: float) -> SweepRow:
        try:
            cell3 = solve_cell3(mesh, identification, coefficients, k, solver_settings, ops)
        except SolverError as e:
            logger.warning("Sweep point k=%g failed: %s", k, e)
            return SweepRow(k=float(k), mu_hom=None, error=str(e))
        at_k = CellSolutions(operators=ops, cell1=cells.cell1, cell2=cells.cell2, cell3=cell3)
        return SweepRow(k=float(k), mu_hom=compute_mu_hom(at_k, k).mu_hom)

    show = sys.stderr.isatty() if progress is None else progress
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(tqdm(pool.map(row, ks), total=len(ks), desc="mu sweep", disable=not show))

    sweep = MuSweep(rows=rows, mu_static=static_permeability(cells))
    sweep.resonances = resonance_intervals(sweep, settings.merge_gap, settings.peak_factor,
                                           settings.min_peak_fraction)
    sweep.band_gaps = band_gap_intervals(sweep)
    logger.info("Swept %d wavenumbers: %d resonance regions, %d band gaps", len(rows), len(sweep.resonances),
                len(sweep.band_gaps))
    return sweep


def _mean_diagonal(sweep: MuSweep) -> Tuple[np.ndarray, np.ndarray]:
    valid = sweep.valid_rows()
    ks = np.array([r.k for r in valid])
    diag = np.array([np.trace(r.mu_hom) / 3.0 for r in valid]) if valid else np.zeros(0, dtype=complex)
    return ks, diag


def _merge(intervals: List[ResonanceInterval], gap: float) -> List[ResonanceInterval]:
    merged: List[ResonanceInterval] = []
    for interval in sorted(intervals, key=lambda i: i.k_lo):
        if merged and interval.k_lo <= merged[-1].k_hi + gap:
            last = merged[-1]
            last.k_hi = max(last.k_hi, interval.k_hi)
            if interval.peak_im is not None and (last.peak_im is None or interval.peak_im > last.peak_im):
                last.k_peak, last.peak_im = interval.k_peak, interval.peak_im
        else:
            merged.append(ResonanceInterval(interval.k_lo, interval.k_hi, interval.k_peak, interval.peak_im))
    return merged


def resonance_intervals(
    sweep: MuSweep,
    merge_gap: float = 1.0,
    peak_factor: float = 3.0,
    min_peak_fraction: float = 0.05
) -> List[ResonanceInterval]:
    """
    Resonance regions of a sweep, from the mean diagonal of mu_hom

    A downward zero crossing of the real part opens a region that the next
    upward crossing closes, so a negative band counts once. Local maxima of the
    imaginary part above max(peak_factor * median, min_peak_fraction * max) mark
    peaks. Regions closer than merge_gap are merged.
    """
    ks, diag = _mean_diagonal(sweep)
    if len(ks) < 2:
        return []
    re, im = diag.real, diag.imag
    intervals: List[ResonanceInterval] = []

    opened: Optional[float] = None
    for i in range(len(ks) - 1):
        if re[i] > 0 >= re[i + 1]:
            if opened is None:
                opened = ks[i]
        elif re[i] <= 0 < re[i + 1]:
            intervals.append(ResonanceInterval(opened if opened is not None else ks[i], ks[i + 1]))
            opened = None
    if opened is not None:
        intervals.append(ResonanceInterval(opened, ks[-1]))

    threshold = max(peak_factor * float(np.median(im)), min_peak_fraction * float(im.max()))
    # interior grid points only; a maximum on the grid edge is not a located peak
    for i in range(1, len(ks) - 1):
        if im[i] >= im[i - 1] and im[i] >= im[i + 1] and im[i] > threshold:
            intervals.append(ResonanceInterval(ks[i], ks[i], ks[i], float(im[i])))

    merged = _merge(intervals, merge_gap)
    for interval in merged:
        if interval.k_peak is None:
            inside = (ks >= interval.k_lo) & (ks <= interval.k_hi)
            best = np.flatnonzero(inside)[np.argmax(im[inside])]
            interval.k_peak, interval.peak_im = float(ks[best]), float(im[best])
    return merged


def band_gap_intervals(sweep: MuSweep) -> List[Tuple[float, float]]:
    """Wavenumber runs on which Re(mu_hom) is negative definite"""
    gaps: List[Tuple[float, float]] = []
    start: Optional[float] = None
    last: Optional[float] = None
    for r in sweep.rows:
        negative = r.mu_hom is not None and np.linalg.eigvalsh(0.5 * (r.mu_hom.real + r.mu_hom.real.T)).max() < 0
        if negative:
            start = r.k if start is None else start
            last = r.k
        elif start is not None:
            gaps.append((start, last))
            start = None
    if start is not None:
        gaps.append((start, last))
    return gaps
