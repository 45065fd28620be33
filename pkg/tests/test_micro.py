import numpy as np
import pytest
from src.config.settings import SolverSettings, SweepSettings
from src.errors import ConfigError, ResonanceError, SingularMatrixError
from src.linalg.solvers.direct import DirectSolver
from src.mesh.builder import build_periodic_cell_mesh
from src.micro.cell_problems import (
    build_cell_operators, compute_mu_hom, cube_resonance_wavenumbers, divergence_defect, solve_cell3, solve_cells
)
from src.micro.components import EffectiveTensors, MicroCoefficients, MuSweep, SweepRow
from src.micro.sweep import band_gap_intervals, resonance_intervals, sweep_mu
from tests.helpers import CENTER_BOX


def _lorentz(k, centers, strength=20.0, damping=0.5):
    """Mean permeability with a Lorentz pole per center"""
    return 1.0 + sum(strength / (c * c - k * k - 1j * damping * k) for c in centers)


def _synthetic_sweep(ks, centers):
    rows = [SweepRow(k=float(k), mu_hom=_lorentz(k, centers) * np.eye(3)) for k in ks]
    return MuSweep(rows=rows, mu_static=np.eye(3))


def test_coefficients_validation():
    with pytest.raises(ConfigError):
        MicroCoefficients(eps0_inv=-1.0, eps1_inv=1.0 - 0.01j)
    with pytest.raises(ConfigError):
        MicroCoefficients(eps0_inv=1.0, eps1_inv=1.0 + 0.01j)
    with pytest.raises(ConfigError):
        MicroCoefficients(eps0_inv=1.0, eps1_inv=1.0)
    assert MicroCoefficients(eps0_inv=1.0, eps1_inv=1.0, allow_lossless=True).eps1_inv == 1.0 + 0.0j


def test_homogeneous_cell_gives_trivial_tensors(solver_settings):
    mesh, identification = build_periodic_cell_mesh(3)
    coefficients = MicroCoefficients(eps0_inv=2.5, eps1_inv=1.0 - 0.01j)
    cells = solve_cells(mesh, identification, coefficients, 7.0, solver_settings)
    tensors = compute_mu_hom(cells, 7.0)
    np.testing.assert_allclose(tensors.eps_inv_hom, 2.5 * np.eye(3), atol=1e-10)
    np.testing.assert_allclose(tensors.mu_hom, np.eye(3), atol=1e-10)
    assert cells.operators.space3.n_dofs == 0


def test_cell_operators_dimensions(cell_mesh, coefficients):
    mesh, identification = cell_mesh
    ops = build_cell_operators(mesh, identification, coefficients)
    assert ops.curl_moments.shape == (3, ops.space1.n_dofs)
    assert ops.gradient_moments.shape == (3, ops.space2.n_dofs)
    assert ops.value_moments.shape == (3, ops.space3.n_dofs)
    assert ops.eps0_integral == pytest.approx(1.0 - CENTER_BOX.volume)
    # the curl-curl matrix annihilates its kernel basis
    residual = ops.curlcurl1 @ ops.kernel_basis.toarray()
    assert np.abs(residual).max() < 1e-10


NON_RESONANT_K = [3.0, 4.0, 5.0, 6.0, 7.0, 11.0, 13.0, 15.0, 17.0, 23.0]


@pytest.mark.parametrize("k", NON_RESONANT_K)
def test_effective_tensors_properties(cell_mesh, coefficients, solver_settings, k):
    mesh, identification = cell_mesh
    cells = solve_cells(mesh, identification, coefficients, k, solver_settings)
    tensors = compute_mu_hom(cells, k)
    assert tensors.eps_asymmetry() <= 1e-10
    assert tensors.mu_asymmetry() <= 1e-8
    assert np.all(tensors.eps_eigenvalues() > 0)
    assert np.all(tensors.mu_imag_eigenvalues() > 0)
    # the Kuhn cell is invariant under axis permutations, so all diagonal
    # entries agree and so do all off-diagonal ones
    eps = tensors.eps_inv_hom
    diagonal = np.diag(eps)
    off = eps[~np.eye(3, dtype=bool)]
    np.testing.assert_allclose(diagonal, diagonal[0], rtol=1e-8)
    np.testing.assert_allclose(off, off[0], rtol=1e-6, atol=1e-10)
    assert np.abs(off).max() < diagonal.min()


def test_static_part_does_not_depend_on_k(cell_mesh, coefficients, solver_settings):
    mesh, identification = cell_mesh
    first = compute_mu_hom(solve_cells(mesh, identification, coefficients, 5.0, solver_settings), 5.0)
    second = compute_mu_hom(solve_cells(mesh, identification, coefficients, 11.0, solver_settings), 11.0)
    np.testing.assert_allclose(first.mu_static, second.mu_static, atol=1e-12)
    np.testing.assert_allclose(first.eps_inv_hom, second.eps_inv_hom, atol=1e-12)
    np.testing.assert_allclose(first.mu_hom, first.mu_static + first.mu_dynamic)


def test_compute_mu_hom_needs_matching_k(cell_mesh, coefficients, solver_settings):
    mesh, identification = cell_mesh
    cells = solve_cells(mesh, identification, coefficients, 5.0, solver_settings)
    with pytest.raises(ValueError):
        compute_mu_hom(cells, 6.0)


def test_divergence_defect_is_finite(cell_mesh, coefficients, solver_settings):
    mesh, identification = cell_mesh
    cells = solve_cells(mesh, identification, coefficients, 5.0, solver_settings)
    defect = divergence_defect(cells, 5.0)
    assert np.isfinite(defect) and defect >= 0.0


def test_singular_inclusion_problem_raises_resonance(cell_mesh, monkeypatch):
    mesh, identification = cell_mesh
    lossless = MicroCoefficients(eps0_inv=1.0, eps1_inv=1.0, allow_lossless=True)

    def singular(self, A):
        raise SingularMatrixError("Numerically singular pivot at row 0", row=0)

    monkeypatch.setattr(DirectSolver, "factorize", singular)
    with pytest.raises(ResonanceError):
        solve_cell3(mesh, identification, lossless, 8.9)


def test_cube_resonance_wavenumbers():
    np.testing.assert_allclose(cube_resonance_wavenumbers(0.5, 1.0 - 0.01j), [8.886, 19.869, 26.657], atol=1e-3)


def test_resonance_intervals_on_synthetic_sweep():
    ks = np.round(np.arange(5.0, 25.0 + 1e-9, 0.1), 10)
    sweep = _synthetic_sweep(ks, centers=(9.0, 20.0))
    intervals = resonance_intervals(sweep)
    assert len(intervals) == 2
    assert intervals[0].k_peak == pytest.approx(9.0, abs=0.15)
    assert intervals[1].k_peak == pytest.approx(20.0, abs=0.15)
    assert intervals[0].contains(9.0)


def test_band_gaps_on_synthetic_sweep():
    ks = np.round(np.arange(5.0, 25.0 + 1e-9, 0.1), 10)
    sweep = _synthetic_sweep(ks, centers=(9.0,))
    gaps = band_gap_intervals(sweep)
    assert len(gaps) == 1
    start, end = gaps[0]
    assert 9.0 <= start < end <= 10.2


def test_failed_rows_are_skipped():
    ks = np.round(np.arange(5.0, 15.0 + 1e-9, 0.1), 10)
    sweep = _synthetic_sweep(ks, centers=(9.0,))
    sweep.rows[3] = SweepRow(k=sweep.rows[3].k, mu_hom=None, error="singular")
    assert len(sweep.valid_rows()) == len(ks) - 1
    assert len(resonance_intervals(sweep)) == 1


def test_sweep_below_first_resonance(cell_mesh, coefficients, solver_settings):
    mesh, identification = cell_mesh
    sweep = sweep_mu(mesh, identification, coefficients, [3.0, 4.0, 5.0, 6.0], SweepSettings(), solver_settings,
                     progress=False)
    assert sweep.resonances == []
    assert sweep.band_gaps == []
    assert [r.k for r in sweep.rows] == [3.0, 4.0, 5.0, 6.0]
    assert all(r.mu_hom is not None for r in sweep.rows)


def test_sweep_rejects_descending_grid(cell_mesh, coefficients):
    mesh, identification = cell_mesh
    with pytest.raises(ConfigError):
        sweep_mu(mesh, identification, coefficients, [6.0, 5.0], progress=False)


def test_threaded_sweep_keeps_grid_order(cell_mesh, coefficients, solver_settings):
    mesh, identification = cell_mesh
    grid = [4.0, 4.5, 5.0, 5.5]
    serial = sweep_mu(mesh, identification, coefficients, grid, solver_settings=solver_settings, progress=False)
    threaded = sweep_mu(mesh, identification, coefficients, grid, solver_settings=solver_settings, threads=3,
                        progress=False)
    assert [r.k for r in threaded.rows] == grid
    for a, b in zip(serial.rows, threaded.rows):
        np.testing.assert_allclose(a.mu_hom, b.mu_hom, rtol=1e-12)


def test_identity_tensors():
    tensors = EffectiveTensors.identity(3.0)
    assert tensors.eps_asymmetry() == 0.0
    np.testing.assert_allclose(tensors.mu_real_eigenvalues(), 1.0)


@pytest.mark.slow
def test_divergence_defect_decays(coefficients, solver_settings):
    defects = []
    for n in (4, 8):
        mesh, identification = build_periodic_cell_mesh(n, CENTER_BOX)
        cells = solve_cells(mesh, identification, coefficients, 5.0, solver_settings)
        defects.append(divergence_defect(cells, 5.0))
    assert defects[1] < defects[0]


def test_fine_sweep_finds_cube_resonances(coefficients):
    mesh, identification = build_periodic_cell_mesh(12, CENTER_BOX)
    grid = SweepSettings().grid()
    sweep = sweep_mu(mesh, identification, coefficients, grid, SweepSettings(), SolverSettings(), threads=4,
                     progress=False)
    assert len(sweep.resonances) == 2
    expected = cube_resonance_wavenumbers(0.5, coefficients.eps1_inv)[:2]
    for interval, k_res in zip(sweep.resonances, expected):
        assert abs(interval.k_peak - k_res) <= 0.05 * k_res

    assert all(row.mu_hom is not None for row in sweep.rows)
    diagonals = np.array([np.diag(row.mu_hom) for row in sweep.rows])
    assert np.all(diagonals.imag > 0)
    assert np.abs(diagonals - diagonals[:, :1]).max() <= 1e-6
    ks = np.array([row.k for row in sweep.rows])
    near_first = (ks >= 8.9) & (ks <= 9.5)
    assert diagonals.real[near_first].min() < 0


def _w3_norm(cell3, operators):
    w3 = cell3.w3
    return np.sqrt(np.real(np.trace(w3.conj().T @ (operators.mass3 @ w3))))


def test_inclusion_corrector_peaks_at_first_cube_resonance(coefficients, solver_settings):
    mesh, identification = build_periodic_cell_mesh(12, CENTER_BOX)
    ops = build_cell_operators(mesh, identification, coefficients)
    ks = np.round(np.arange(8.0, 10.01, 0.1), 10)
    norms = [_w3_norm(solve_cell3(mesh, identification, coefficients, k, solver_settings, ops), ops) for k in ks]
    k_peak = ks[int(np.argmax(norms))]
    assert abs(k_peak - 8.886) <= 0.05 * 8.886


def test_inclusion_corrector_is_even_in_k(cell_mesh, coefficients, solver_settings):
    mesh, identification = cell_mesh
    ops = build_cell_operators(mesh, identification, coefficients)
    plus = solve_cell3(mesh, identification, coefficients, 7.3, solver_settings, ops)
    minus = solve_cell3(mesh, identification, coefficients, -7.3, solver_settings, ops)
    np.testing.assert_allclose(minus.w3, plus.w3, rtol=1e-12, atol=1e-14)
