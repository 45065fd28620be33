import logging
from pathlib import Path
from typing import List, Optional
import numpy as np
from src.config.settings import AppConfig
from src.fem.norms import weighted_norms
from src.hmm.pipeline import hmm_solve
from src.hmm.reconstruction import zeroth_order_field
from src.hmm.study import convergence_study
from src.io.cache import ReferenceCache
from src.io.writers import (
    OutputSession, format_study_table, write_eps_hom_csv, write_mu_parts_csv, write_resonances, write_slice_csv,
    write_study_csv, write_sweep_csv, write_vtk
)
from src.macro.components import MacroSolution
from src.macro.scatter import build_scatter_mesh, plane_slice, solve_effective
from src.mesh.builder import build_periodic_cell_mesh
from src.micro.cell_problems import compute_mu_hom, divergence_defect, solve_cells
from src.micro.components import EffectiveTensors
from src.micro.sweep import sweep_mu

logger = logging.getLogger(__name__)


def _cell_mesh(config: AppConfig):
    return build_periodic_cell_mesh(config.micro.mesh_n, config.micro.inclusion_box())


def _tensor_lines(name: str, tensor: np.ndarray) -> List[str]:
    return [f"{name}:"] + ["  " + "  ".join(f"{v:.9g}" for v in row) for row in np.atleast_2d(tensor)]


def _energy_lines(solution: MacroSolution) -> List[str]:
    if solution.energy is None:
        return []
    e = solution.energy
    return [f"Im parts: curl {e.curl_loss:.6e}, absorption {e.absorption:.6e}, "
            f"impedance {e.impedance_loss:.6e}, flux {e.flux:.6e}"]


def _macro_summary(solution: MacroSolution) -> List[str]:
    norms = weighted_norms(solution.u_H, solution.k)
    return [
        f"k: {solution.k:g}",
        f"macro mesh: n = {solution.n_per_axis}, H = {solution.H:.6g}, dofs = {solution.u_H.space.n_dofs}",
        f"solve residual: {solution.report.residual:.3e}",
        f"energy balance defect: {solution.energy_defect:.3e}",
        *_energy_lines(solution),
        f"||u||: {norms.l2:.9g}",
        f"||curl u||: {norms.curl_semi:.9g}",
        f"||u||_imp,k: {norms.imp_k:.9g}",
    ]


def cmd_cell(config: AppConfig, out: OutputSession) -> EffectiveTensors:
    """Cell problems at config.scatter.k: eps_hom.csv, mu_parts.csv and cell_summary.txt"""
    mesh, identification = _cell_mesh(config)
    coefficients = config.micro.to_coefficients()
    k = config.scatter.k
    cells = solve_cells(mesh, identification, coefficients, k, config.solver)
    tensors = compute_mu_hom(cells, k)
    write_eps_hom_csv(out.path("eps_hom.csv"), tensors)
    write_mu_parts_csv(out.path("mu_parts.csv"), tensors)

    ops = cells.operators
    lines = [mesh.summary(), ""]
    lines += [
        f"k: {k:g}",
        f"dofs: matrix edges {ops.space1.n_dofs}, matrix nodes {ops.space2.n_dofs}, inclusion edges "
        f"{ops.space3.n_dofs}",
        f"cell problem 1 CG iterations: {[r.iterations for r in cells.cell1.reports]}",
        f"cell problem 2 CG iterations: {[r.iterations for r in cells.cell2.reports]}",
        f"divergence defect: {divergence_defect(cells, k):.3e}",
        f"eps_inv_hom asymmetry: {tensors.eps_asymmetry():.3e}",
        f"mu_hom asymmetry: {tensors.mu_asymmetry():.3e}",
        f"eps_inv_hom eigenvalues: {np.array2string(tensors.eps_eigenvalues(), precision=9)}",
        f"Im mu_hom eigenvalues: {np.array2string(tensors.mu_imag_eigenvalues(), precision=9)}",
    ]
    lines += _tensor_lines("eps_inv_hom", tensors.eps_inv_hom)
    lines += _tensor_lines("mu_hom", tensors.mu_hom)
    out.path("cell_summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("Cell problems done; outputs in %s", out.out_dir)
    return tensors


def cmd_musweep(config: AppConfig, out: OutputSession, threads: int = 1):
    """Permeability sweep over the configured grid: mu_sweep.csv and resonances.txt"""
    mesh, identification = _cell_mesh(config)
    sweep = sweep_mu(mesh, identification, config.micro.to_coefficients(), config.sweep.grid(), config.sweep,
                     config.solver, threads)
    write_sweep_csv(out.path("mu_sweep.csv"), sweep)
    write_resonances(out.path("resonances.txt"), sweep)
    for r in sweep.resonances:
        print(f"resonance: k in [{r.k_lo:g}, {r.k_hi:g}], peak at k={r.k_peak:g}")
    failed = [r.k for r in sweep.rows if r.error is not None]
    if failed:
        logger.warning("%d wavenumbers failed: %s", len(failed), failed)
    return sweep


def _write_macro_outputs(config: AppConfig, out: OutputSession, solution: MacroSolution, prefix: str,
                         slice_field=None) -> None:
    scatter = config.scatter
    write_vtk(out.path(f"{prefix}.vtk"), solution.u_H, title=f"{prefix} k={solution.k:g}")
    plane = plane_slice(slice_field or solution.u_H, config.scatter.G.to_box(), scatter.slice_axis,
                        scatter.slice_offset, scatter.slice_resolution)
    write_slice_csv(out.path(f"{prefix}_slice.csv"), plane)


def cmd_solve(config: AppConfig, out: OutputSession, dump_dir: Optional[Path] = None) -> MacroSolution:
    """Effective scattering problem with tensors from the cell problems"""
    scatter_config = config.scatter.to_scatter_config()
    mesh = build_scatter_mesh(scatter_config, config.scatter.mesh_n)
    mesh_Y, identification = _cell_mesh(config)
    cells = solve_cells(mesh_Y, identification, config.micro.to_coefficients(), scatter_config.k, config.solver)
    tensors = compute_mu_hom(cells, scatter_config.k)
    solution = solve_effective(scatter_config.with_tensors(tensors), mesh, config.solver, dump_dir)
    _write_macro_outputs(config, out, solution, "effective")
    summary = _macro_summary(solution) + _tensor_lines("mu_hom", tensors.mu_hom)
    out.path("solve_summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    return solution


def cmd_hmm(config: AppConfig, out: OutputSession, dump_dir: Optional[Path] = None):
    """HMM solve; the slice samples the zeroth-order field with the configured period delta"""
    scatter_config = config.scatter.to_scatter_config()
    mesh_G = build_scatter_mesh(scatter_config, config.scatter.mesh_n)
    mesh_Y, identification = _cell_mesh(config)
    hmm = hmm_solve(scatter_config, mesh_G, mesh_Y, identification, config.micro.to_coefficients(),
                    settings=config.solver, dump_dir=dump_dir)
    delta = config.scatter.delta
    _write_macro_outputs(config, out, hmm.macro, "hmm", slice_field=lambda x: zeroth_order_field(hmm, delta, x))
    summary = _macro_summary(hmm.macro) + [f"micro mesh: n = {mesh_Y.n_per_axis}, h = {mesh_Y.diameter:.6g}",
                                           f"delta: {delta:g}"]
    summary += _tensor_lines("eps_inv_hom", hmm.tensors.eps_inv_hom) + _tensor_lines("mu_hom", hmm.tensors.mu_hom)
    out.path("hmm_summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    return hmm


def cmd_study(config: AppConfig, out: OutputSession, threads: int = 1):
    """Convergence study against the cached reference: study.csv and the table on standard output"""
    study = config.study
    report = convergence_study(
        config.scatter.to_scatter_config(),
        config.micro.to_coefficients(),
        config.micro.inclusion_box(),
        study.mesh_ns,
        study.reference_macro_n,
        study.reference_micro_n,
        settings=config.solver,
        cache=ReferenceCache(),
        threads=threads,
    )
    write_study_csv(out.path("study.csv"), report)
    print(format_study_table(report))
    return report
