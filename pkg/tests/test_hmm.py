import numpy as np
import pytest
from src.errors import ConfigError, TransferError
from src.fem.assembly import assemble_p1_mass, discrete_gradient
from src.fem.interpolation import interpolate_edge, interpolate_nodal
from src.fem.spaces import EdgeSpace, FieldFunction, NodalSpace
from src.hmm import study
from src.hmm.components import ConvergenceReport, ErrorReport
from src.hmm.error_norms import eoc, error_norms, helmholtz_theta
from src.hmm.monolithic import monolithic_solve
from src.hmm.pipeline import hmm_solve
from src.hmm.reconstruction import micro_coordinates, zeroth_order_field
from src.hmm.study import convergence_study
from src.io.cache import ReferenceCache
from src.linalg.components import SolverReport
from src.macro.components import MacroSolution, ScatterConfig
from src.macro.incident import incident_plane_wave
from src.macro.scatter import build_scatter_mesh, solve_effective
from src.mesh.builder import build_box_mesh, build_periodic_cell_mesh
from src.mesh.components import UNIT_CELL
from src.micro.components import MicroCoefficients
from tests.helpers import CENTER_BOX, THIRDS_BOX, constant_field


def _bubble(x):
    return x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1]) * x[:, 2] * (1 - x[:, 2])


def _interpolated_solution(n, k=3.0):
    """Macro 'solution' holding the edge interpolant of the incident wave"""
    mesh = build_box_mesh(UNIT_CELL, n)
    u = interpolate_edge(EdgeSpace(mesh), incident_plane_wave(k))
    return MacroSolution(u_H=u, k=k, mesh=mesh, report=SolverReport(iterations=0, residual=0.0, converged=True))


def _thirds_config(k=4.0):
    return ScatterConfig(G=UNIT_CELL, Omega=THIRDS_BOX, k=k, incident=incident_plane_wave(k))


def test_eoc_values():
    orders = eoc([(np.sqrt(3) / 4, 0.945214), (np.sqrt(3) / 8, 0.5316)])
    assert orders[0] == pytest.approx(0.8303, abs=1e-3)
    assert eoc([(0.5, 11.6003), (0.25, 5.76452)])[0] == pytest.approx(1.0089, abs=1e-3)
    assert eoc([(0.5, 1.0), (0.25, 1.0)]) == [0.0]
    assert eoc([(0.5, 1.0), (0.25, 0.0), (0.125, 0.5)]) == [None, None]
    assert eoc([(0.5, 1.0)]) == []


def test_eoc_needs_decreasing_sizes():
    with pytest.raises(ValueError):
        eoc([(0.25, 1.0), (0.5, 0.5)])
    with pytest.raises(ValueError):
        eoc([(0.0, 1.0), (0.0, 0.5)])


def test_helmholtz_theta_recovers_discrete_gradient():
    mesh = build_box_mesh(UNIT_CELL, 4)
    nodal = NodalSpace(mesh, "zero_boundary")
    edge = EdgeSpace(mesh)
    theta_I = interpolate_nodal(nodal, _bubble).coefficients.astype(complex)
    e0 = FieldFunction(edge, discrete_gradient(nodal, edge) @ theta_I)
    theta, theta_l2 = helmholtz_theta(e0)
    np.testing.assert_allclose(theta.coefficients, theta_I, atol=1e-12)
    expected = np.sqrt(np.real(np.vdot(theta_I, assemble_p1_mass(nodal) @ theta_I)))
    assert theta_l2 == pytest.approx(expected, rel=1e-10)


def test_helmholtz_theta_of_constant_field_vanishes():
    mesh = build_box_mesh(UNIT_CELL, 3)
    e0 = interpolate_edge(EdgeSpace(mesh), constant_field([1.0, 0.0, 0.0]))
    _, theta_l2 = helmholtz_theta(e0)
    assert theta_l2 == pytest.approx(0.0, abs=1e-12)


def test_helmholtz_theta_needs_edge_field():
    mesh = build_box_mesh(UNIT_CELL, 2)
    with pytest.raises(TypeError):
        helmholtz_theta(interpolate_nodal(NodalSpace(mesh), _bubble))


def test_error_norms_against_itself():
    solution = _interpolated_solution(4)
    report = error_norms(solution, solution)
    assert (report.l2, report.curl_semi, report.theta_l2) == (0.0, 0.0, 0.0)
    assert report.H == report.h == solution.H


def test_error_norms_on_nested_meshes():
    report = error_norms(_interpolated_solution(2), _interpolated_solution(4), h=0.1)
    assert report.l2 > 0 and report.curl_semi > 0
    assert report.h == 0.1
    assert report.k == 3.0


def test_error_norms_need_nested_meshes():
    coarse, other = _interpolated_solution(2), _interpolated_solution(3)
    with pytest.raises(TransferError):
        error_norms(coarse, other)
    report = error_norms(coarse, other, allow_evaluation=True)
    assert report.l2 > 0


def test_error_report_rejects_negative_norms():
    with pytest.raises(ValueError):
        ErrorReport(l2=-1.0, curl_semi=0.0, theta_l2=0.0, H=0.5, h=0.5, k=1.0)


def test_convergence_report_row_eocs():
    rows = [ErrorReport(1.0, 1.0, 1.0, 0.5, 0.5, 1.0), ErrorReport(0.5, 0.5, 0.5, 0.25, 0.25, 1.0)]
    report = ConvergenceReport(rows=rows, eoc_l2=[1.0], eoc_curl=[1.0], eoc_theta=[None])
    assert report.row_eocs(0) == (None, None, None)
    assert report.row_eocs(1) == (1.0, 1.0, None)


def test_hmm_without_inclusion_matches_free_space(scatter_config, solver_settings):
    mesh_G = build_scatter_mesh(scatter_config, 4)
    mesh_Y, identification = build_periodic_cell_mesh(3)
    coefficients = MicroCoefficients(eps0_inv=1.0, eps1_inv=1.0 - 0.01j)
    hmm = hmm_solve(scatter_config, mesh_G, mesh_Y, identification, coefficients, settings=solver_settings)
    free = solve_effective(scatter_config, mesh_G)
    np.testing.assert_allclose(hmm.macro.u_H.coefficients, free.u_H.coefficients, rtol=1e-9, atol=1e-12)


def test_hmm_wavenumber_override(scatter_config, cell_mesh, coefficients, solver_settings):
    mesh_Y, identification = cell_mesh
    hmm = hmm_solve(scatter_config, build_scatter_mesh(scatter_config, 4), mesh_Y, identification, coefficients,
                    k=5.0, settings=solver_settings)
    assert hmm.k == 5.0
    assert hmm.config.incident.k == 5.0
    assert hmm.tensors.k == 5.0


def test_micro_coordinates():
    y = micro_coordinates(np.array([[0.3, -0.05, 1.0]]), 0.25)
    np.testing.assert_allclose(y, [[0.2, 0.8, 0.0]], atol=1e-12)
    assert np.all((y >= 0) & (y < 1))


def test_zeroth_order_field(scatter_config, cell_mesh, coefficients, solver_settings):
    mesh_Y, identification = cell_mesh
    hmm = hmm_solve(scatter_config, build_scatter_mesh(scatter_config, 4), mesh_Y, identification, coefficients,
                    settings=solver_settings)
    outside = np.array([[0.1, 0.1, 0.1], [0.9, 0.5, 0.5], [0.5, 0.05, 0.6]])
    np.testing.assert_allclose(zeroth_order_field(hmm, 0.0625, outside), hmm.macro.u_H.evaluate(outside))

    inside = np.array([[0.5, 0.5, 0.5], [0.3, 0.6, 0.45]])
    values = zeroth_order_field(hmm, 0.0625, inside)
    assert values.shape == (2, 3)
    assert np.all(np.isfinite(values))
    with pytest.raises(ConfigError):
        zeroth_order_field(hmm, 0.0, inside)


def test_correctors_have_cell_space_size(scatter_config, cell_mesh, coefficients, solver_settings):
    mesh_Y, identification = cell_mesh
    hmm = hmm_solve(scatter_config, build_scatter_mesh(scatter_config, 4), mesh_Y, identification, coefficients,
                    settings=solver_settings)
    ops = hmm.cells.operators
    assert len(hmm.scatterer_tets) == 48
    assert hmm.corrector1(0).shape == (ops.space1.n_dofs,)
    assert hmm.corrector2(0, 1).shape == (ops.space2.n_dofs,)
    assert hmm.corrector3(47, 3).shape == (ops.space3.n_dofs,)


def _compare_with_two_scale_system(micro_n, coefficients, solver_settings):
    config = _thirds_config()
    mesh_G = build_scatter_mesh(config, 3)
    mesh_Y, identification = build_periodic_cell_mesh(micro_n, THIRDS_BOX)
    hmm = hmm_solve(config, mesh_G, mesh_Y, identification, coefficients, settings=solver_settings)
    direct = monolithic_solve(config, mesh_G, mesh_Y, identification, coefficients, solver_settings)

    u_hmm = hmm.macro.u_H.coefficients
    u_direct = direct.u_H.coefficients
    assert np.linalg.norm(u_direct - u_hmm) <= 1e-8 * np.linalg.norm(u_hmm)

    n_points = direct.u3.shape[0] // len(hmm.scatterer_tets)
    expected = np.array([hmm.corrector3(t, q) for t in range(len(hmm.scatterer_tets)) for q in range(n_points)])
    assert np.linalg.norm(direct.u3 - expected) <= 1e-8 * max(np.linalg.norm(expected), 1e-30)


def test_two_scale_system_matches_hmm(coefficients, solver_settings):
    _compare_with_two_scale_system(3, coefficients, solver_settings)


@pytest.mark.slow
def test_two_scale_system_matches_hmm_on_finer_cell(coefficients, solver_settings):
    _compare_with_two_scale_system(6, coefficients, solver_settings)


def test_convergence_study_uses_the_cache(scatter_config, coefficients, solver_settings, tmp_path, monkeypatch):
    cache = ReferenceCache(str(tmp_path / "cache"))
    first = convergence_study(scatter_config, coefficients, CENTER_BOX, [4], 8, 4, settings=solver_settings,
                              cache=cache, progress=False)
    assert len(first.rows) == 1
    row = first.rows[0]
    assert row.l2 > 0 and row.curl_semi > 0 and row.theta_l2 >= 0
    assert row.h == pytest.approx(np.sqrt(3.0) / 4.0)
    assert first.eoc_l2 == []
    assert len(cache.index) == 1
    assert (tmp_path / "cache" / "index.json").exists()

    def no_solve(*args, **kwargs):
        raise AssertionError("reference was recomputed")

    monkeypatch.setattr(study, "solve_effective", no_solve)
    second = convergence_study(scatter_config, coefficients, CENTER_BOX, [4], 8, 4, settings=solver_settings,
                               cache=ReferenceCache(str(tmp_path / "cache")), progress=False)
    assert second.rows[0].l2 == pytest.approx(row.l2, rel=1e-12)


@pytest.mark.parametrize("mesh_ns, ref_macro, ref_micro", [
    ([], 8, 4),
    ([4], None, 4),
    ([4], 8, None),
    ([8, 4], 16, 4),
    ([4, 8], 8, 4),
    ([4, 8], 12, 4),
])
def test_convergence_study_validation(scatter_config, coefficients, tmp_path, mesh_ns, ref_macro, ref_micro):
    with pytest.raises(ConfigError):
        convergence_study(scatter_config, coefficients, CENTER_BOX, mesh_ns, ref_macro, ref_micro,
                          cache=ReferenceCache(str(tmp_path)), progress=False)


def _study_at(k, coefficients, solver_settings, tmp_path):
    config = ScatterConfig(G=UNIT_CELL, Omega=CENTER_BOX, k=k, incident=incident_plane_wave(k))
    return convergence_study(config, coefficients, CENTER_BOX, [4, 8, 12], 24, 12, settings=solver_settings,
                             cache=ReferenceCache(str(tmp_path)), threads=2, progress=False)


def _assert_convergence_trend(report):
    assert [r.H for r in report.rows] == sorted((r.H for r in report.rows), reverse=True)
    for coarse, fine in zip(report.rows, report.rows[1:]):
        assert fine.l2 < coarse.l2
        assert fine.curl_semi < coarse.curl_semi
    assert all(order is not None for order in report.eoc_l2 + report.eoc_curl + report.eoc_theta)
    assert 0.8 <= report.eoc_l2[-1] <= 1.4
    assert 0.9 <= report.eoc_curl[-1] <= 1.5
    assert report.eoc_theta[-1] - report.eoc_l2[-1] >= 0.5


@pytest.mark.slow
def test_convergence_study_at_k12(coefficients, solver_settings, tmp_path):
    _assert_convergence_trend(_study_at(12.0, coefficients, solver_settings, tmp_path))


@pytest.mark.slow
def test_convergence_study_in_the_band_gap(coefficients, solver_settings, tmp_path):
    _assert_convergence_trend(_study_at(9.0, coefficients, solver_settings, tmp_path))


def _inclusion_centers(delta):
    axis = np.arange(0.25 + delta / 2, 0.75, delta)
    return np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)


def test_micro_amplitudes_are_larger_in_the_band_gap(coefficients, solver_settings):
    config = ScatterConfig(G=UNIT_CELL, Omega=CENTER_BOX, k=12.0, incident=incident_plane_wave(12.0))
    mesh_G = build_scatter_mesh(config, 8)
    mesh_Y, identification = build_periodic_cell_mesh(12, CENTER_BOX)
    delta = 0.125
    points = _inclusion_centers(delta)
    assert len(points) == 64

    amplitude = {}
    for k in (9.0, 12.0):
        hmm = hmm_solve(config, mesh_G, mesh_Y, identification, coefficients, k=k, settings=solver_settings)
        amplitude[k] = np.linalg.norm(zeroth_order_field(hmm, delta, points), axis=1).mean()
    assert amplitude[9.0] > 2.0 * amplitude[12.0]
