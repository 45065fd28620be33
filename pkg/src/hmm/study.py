import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence
import numpy as np
from tqdm import tqdm
from src.config.settings import SolverSettings
from src.errors import ConfigError
from src.fem.spaces import EdgeSpace, FieldFunction
from src.hmm.components import ConvergenceReport, ErrorReport
from src.hmm.error_norms import eoc, error_norms
from src.hmm.pipeline import hmm_solve
from src.io.cache import ReferenceCache, cache_key
from src.linalg.components import SolverReport
from src.macro.components import MacroSolution, ScatterConfig
from src.macro.scatter import build_scatter_mesh, solve_effective
from src.mesh.builder import build_periodic_cell_mesh
from src.mesh.components import AxisBox
from src.micro.cell_problems import compute_mu_hom, solve_cells
from src.micro.components import EffectiveTensors, MicroCoefficients

logger = logging.getLogger(__name__)


def _reference_inputs(config: ScatterConfig, coefficients: MicroCoefficients, inclusion: Optional[AxisBox],
                      macro_n: int, micro_n: int) -> dict:
    wave = config.incident
    return {
        "G": [config.G.lo, config.G.hi],
        "Omega": [config.Omega.lo, config.Omega.hi],
        "k": config.k,
        "direction": wave.direction,
        "polarization": wave.polarization,
        "amplitude": wave.amplitude,
        "eps0_inv": np.asarray(coefficients.eps0_inv, dtype=float),
        "eps1_inv": coefficients.eps1_inv,
        "inclusion": None if inclusion is None else [inclusion.lo, inclusion.hi],
        "macro_n": macro_n,
        "micro_n": micro_n,
    }


def reference_solution(
    config: ScatterConfig,
    coefficients: MicroCoefficients,
    inclusion: Optional[AxisBox],
    macro_n: int,
    micro_n: int,
    settings: Optional[SolverSettings] = None,
    cache: Optional[ReferenceCache] = None
) -> MacroSolution:
    """
    Effective solution on a fine macro mesh with tensors from a fine cell mesh

    The solution is looked up in, or written to, the reference cache.
    """
    key = cache_key(_reference_inputs(config, coefficients, inclusion, macro_n, micro_n))
    mesh = build_scatter_mesh(config, macro_n)
    cached = cache.load(key) if cache is not None else None
    if cached is not None:
        arrays, entry = cached
        tensors = EffectiveTensors(eps_inv_hom=arrays["eps_inv_hom"], mu_hom=arrays["mu_hom"], k=config.k)
        report = SolverReport(iterations=0, residual=float(entry["residual"]), converged=True)
        return MacroSolution(u_H=FieldFunction(EdgeSpace(mesh), arrays["u"]), k=config.k, mesh=mesh,
                             report=report, energy_defect=float(entry["energy_defect"]), tensors=tensors)

    logger.info("Computing reference solution: macro n=%d, micro n=%d, k=%g", macro_n, micro_n, config.k)
    mesh_Y, identification = build_periodic_cell_mesh(micro_n, inclusion)
    cells = solve_cells(mesh_Y, identification, coefficients, config.k, settings)
    tensors = compute_mu_hom(cells, config.k)
    solution = solve_effective(config.with_tensors(tensors), mesh, settings)
    if cache is not None:
        cache.store(
            key,
            {"u": solution.u_H.coefficients, "eps_inv_hom": tensors.eps_inv_hom, "mu_hom": tensors.mu_hom},
            {"label": f"macro n={macro_n}, micro n={micro_n}, k={config.k:g}", "macro_n": macro_n,
             "micro_n": micro_n, "k": config.k, "residual": solution.report.residual,
             "energy_defect": solution.energy_defect},
        )
    return solution


def _check_study(mesh_ns: Sequence[int], reference_macro_n: Optional[int], reference_micro_n: Optional[int],
                 allow_evaluation: bool) -> None:
    if len(mesh_ns) == 0:
        raise ConfigError("The study needs at least one mesh")
    if reference_macro_n is None or reference_micro_n is None:
        logger.error("Study configuration lacks a reference resolution")
        raise ConfigError("The study needs reference_macro_n and reference_micro_n")
    if any(b <= a for a, b in zip(mesh_ns, mesh_ns[1:])):
        raise ConfigError("Study meshes must be strictly refined")
    if reference_macro_n <= max(mesh_ns):
        raise ConfigError(
            f"Reference resolution {reference_macro_n} must be finer than every study mesh (max {max(mesh_ns)})"
        )
    if not allow_evaluation and any(reference_macro_n % n for n in mesh_ns):
        raise ConfigError(f"Reference resolution {reference_macro_n} is not a refinement of every study mesh")


def convergence_study(
    config: ScatterConfig,
    coefficients: MicroCoefficients,
    inclusion: Optional[AxisBox],
    mesh_ns: Sequence[int],
    reference_macro_n: Optional[int],
    reference_micro_n: Optional[int],
    k: Optional[float] = None,
    settings: Optional[SolverSettings] = None,
    cache: Optional[ReferenceCache] = None,
    threads: int = 1,
    allow_evaluation: bool = False,
    progress: Optional[bool] = None
) -> ConvergenceReport:
    """
    HMM solutions on simultaneously refined macro and cell meshes against a fine reference

    Row n uses n subdivisions per axis on both G and the unit cell. The
    reference is computed once, before the rows, and only read afterwards.

    Args:
        config (ScatterConfig): Macro setup
        coefficients (MicroCoefficients): Cell coefficients
        inclusion (Optional[AxisBox]): Inclusion in the unit cell
        mesh_ns (Sequence[int]): Resolutions per axis, increasing
        reference_macro_n (Optional[int]): Macro resolution of the reference
        reference_micro_n (Optional[int]): Cell resolution of the reference tensors
        k (Optional[float]): Wavenumber; defaults to config.k
        settings (Optional[SolverSettings]): Linear solver parameters
        cache (Optional[ReferenceCache]): Reference cache; a default cache is opened if omitted
        threads (int): Worker threads for the rows; rows keep their order
        allow_evaluation (bool): Accept a reference that does not refine every study mesh
        progress (Optional[bool]): Show a progress bar; defaults to whether stderr is a terminal

    Returns:
        ConvergenceReport: One row per mesh with EOCs between consecutive rows
    """
    _check_study(mesh_ns, reference_macro_n, reference_micro_n, allow_evaluation)
    if k is not None:
        config = config.at_wavenumber(k)
    cache = cache or ReferenceCache()
    reference = reference_solution(config, coefficients, inclusion, reference_macro_n, reference_micro_n,
                                   settings, cache)

    def row(n: int) -> ErrorReport:
        mesh_G = build_scatter_mesh(config, n)
        mesh_Y, identification = build_periodic_cell_mesh(n, inclusion)
        hmm = hmm_solve(config, mesh_G, mesh_Y, identification, coefficients, settings=settings)
        report = error_norms(hmm.macro, reference, config.k, h=mesh_Y.diameter, allow_evaluation=allow_evaluation)
        logger.info("Study row n=%d done", n)
        return report

    show = sys.stderr.isatty() if progress is None else progress
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(tqdm(pool.map(row, mesh_ns), total=len(mesh_ns), desc="study", disable=not show))

    return ConvergenceReport(
        rows=rows,
        eoc_l2=eoc([(r.H, r.l2) for r in rows]),
        eoc_curl=eoc([(r.H, r.curl_semi) for r in rows]),
        eoc_theta=eoc([(r.H, r.theta_l2) for r in rows]),
    )
