import numpy as np
import pytest
from src.errors import ConfigError, GeometryError, SolverError
from src.fem.interpolation import interpolate_edge
from src.fem.norms import analytic_errors
from src.fem.spaces import EdgeSpace
from src.hmm.error_norms import eoc
from src.linalg.components import symmetry_defect
from src.macro import scatter
from src.macro.components import IncidentWave, ScatterConfig
from src.macro.incident import impedance_data, impedance_trace_g, incident_plane_wave
from src.macro.scatter import (
    assemble_effective_system, build_scatter_mesh, energy_balance, plane_slice, region_tensors, solve_effective
)
from src.mesh.components import AxisBox, TAG_INSIDE, UNIT_CELL
from src.micro.components import EffectiveTensors
from tests.helpers import CENTER_BOX

E1, E2, E3 = np.eye(3)


def _face_points(axis, value, count=5, seed=0):
    points = np.random.default_rng(seed).uniform(0.0, 1.0, size=(count, 3))
    points[:, axis] = value
    return points


def test_incident_wave_values_and_curl():
    k = 2.5
    wave = incident_plane_wave(k)
    x = np.array([[0.3, 0.1, 0.9], [0.0, 0.0, 0.0]])
    phase = np.exp(-1j * k * x[:, 0])
    np.testing.assert_allclose(wave(x), phase[:, None] * E2)
    np.testing.assert_allclose(wave.curl(x), -1j * k * phase[:, None] * E3)


def test_incident_wave_validation():
    with pytest.raises(ConfigError):
        IncidentWave(k=1.0, direction=E1, polarization=E1)
    with pytest.raises(ConfigError):
        IncidentWave(k=1.0, direction=2 * E1, polarization=E2)


def test_impedance_data_on_faces():
    k = 3.0
    g = impedance_data(incident_plane_wave(k))

    left = _face_points(0, 0.0)
    np.testing.assert_allclose(g(left, np.broadcast_to(-E1, left.shape)), 0.0, atol=1e-12)

    right = _face_points(0, 1.0)
    expected = -2j * k * np.exp(-1j * k) * E2
    np.testing.assert_allclose(g(right, np.broadcast_to(E1, right.shape)),
                               np.broadcast_to(expected, right.shape), atol=1e-12)

    front = _face_points(1, 0.0)
    expected = (-1j * k * np.exp(-1j * k * front[:, 0]))[:, None] * E1
    np.testing.assert_allclose(g(front, np.broadcast_to(-E2, front.shape)), expected, atol=1e-12)


def test_impedance_trace_is_tangential():
    mesh = build_scatter_mesh(
        ScatterConfig(G=UNIT_CELL, Omega=CENTER_BOX, k=5.0, incident=incident_plane_wave(5.0)), 4)
    trace = impedance_trace_g(incident_plane_wave(5.0), mesh)
    normal_part = np.einsum("fqi,fi->fq", trace.values, trace.normals)
    assert np.abs(normal_part).max() < 1e-12
    assert trace.points.shape == trace.values.shape


def test_scatter_config_validation():
    with pytest.raises(GeometryError):
        ScatterConfig(G=UNIT_CELL, Omega=AxisBox((0.0, 0.25, 0.25), (0.5, 0.75, 0.75)), k=1.0,
                      incident=incident_plane_wave(1.0))
    with pytest.raises(ConfigError):
        ScatterConfig(G=UNIT_CELL, Omega=CENTER_BOX, k=0.0, incident=incident_plane_wave(0.0))


def test_at_wavenumber_moves_the_incident_wave(scatter_config):
    moved = scatter_config.at_wavenumber(7.0)
    assert moved.k == 7.0
    assert moved.incident.k == 7.0
    assert moved.tensors is None
    assert scatter_config.at_wavenumber(scatter_config.k) is scatter_config


def test_region_tensors(scatter_config):
    mesh = build_scatter_mesh(scatter_config, 4)
    inside = np.diag([2.0, 3.0, 4.0])
    tensors = region_tensors(mesh, inside)
    np.testing.assert_allclose(tensors[mesh.subdomain_tag == TAG_INSIDE], np.broadcast_to(inside, (48, 3, 3)))
    np.testing.assert_allclose(tensors[mesh.subdomain_tag != TAG_INSIDE][0], np.eye(3))


def test_effective_system_is_complex_symmetric(scatter_config):
    mesh = build_scatter_mesh(scatter_config, 4)
    tensors = EffectiveTensors(eps_inv_hom=np.diag([0.8, 0.8, 0.8]), mu_hom=(1.2 + 0.3j) * np.eye(3), k=4.0)
    matrix, rhs = assemble_effective_system(scatter_config.with_tensors(tensors), mesh)
    assert symmetry_defect(matrix) <= 1e-12
    assert rhs.shape == (matrix.shape[0],)


def test_mesh_must_cover_G(scatter_config):
    other = ScatterConfig(G=AxisBox((0.0, 0.0, 0.0), (2.0, 2.0, 2.0)), Omega=AxisBox((0.5, 0.5, 0.5),
                          (1.5, 1.5, 1.5)), k=4.0, incident=incident_plane_wave(4.0))
    with pytest.raises(GeometryError):
        assemble_effective_system(other, build_scatter_mesh(scatter_config, 4))


def test_zero_incident_gives_zero_solution(scatter_config):
    silent = ScatterConfig(G=UNIT_CELL, Omega=CENTER_BOX, k=4.0,
                           incident=incident_plane_wave(4.0, amplitude=0.0))
    solution = solve_effective(silent, build_scatter_mesh(silent, 4))
    assert not np.any(solution.u_H.coefficients)


@pytest.mark.parametrize("k", np.random.default_rng(11).uniform(6.0, 14.0, size=5))
def test_zero_data_gives_zero_solution_with_effective_tensors(k):
    silent = ScatterConfig(G=UNIT_CELL, Omega=CENTER_BOX, k=k, incident=incident_plane_wave(k, amplitude=0.0))
    tensors = EffectiveTensors(eps_inv_hom=(0.8 - 0.01j) * np.eye(3), mu_hom=(-0.5 + 0.3j) * np.eye(3), k=k)
    solution = solve_effective(silent.with_tensors(tensors), build_scatter_mesh(silent, 4))
    assert np.linalg.norm(solution.u_H.coefficients) == 0.0
    assert solution.report.residual == 0.0


def test_energy_balance(scatter_config):
    tensors = EffectiveTensors(eps_inv_hom=(0.7 - 0.05j) * np.eye(3), mu_hom=(0.9 + 0.2j) * np.eye(3), k=4.0)
    solution = solve_effective(scatter_config.with_tensors(tensors), build_scatter_mesh(scatter_config, 4))
    assert solution.report.residual <= scatter.RESIDUAL_LIMIT
    assert solution.energy_defect <= 1e-8
    energy = solution.energy
    assert energy.curl_loss < 0.0
    assert energy.absorption < 0.0
    assert energy.impedance_loss < 0.0
    assert energy.total == pytest.approx(energy.flux, rel=1e-8)
    assert solution.n_per_axis == 4
    assert solution.H == pytest.approx(np.sqrt(3.0) / 4.0)


def test_free_space_solution_converges_to_incident_wave():
    k = 2.0
    config = ScatterConfig(G=UNIT_CELL, Omega=CENTER_BOX, k=k, incident=incident_plane_wave(k))
    errors = []
    for n in (4, 8):
        solution = solve_effective(config, build_scatter_mesh(config, n))
        l2, curl = analytic_errors(solution.u_H, config.incident, config.incident.curl)
        errors.append((solution.H, np.hypot(l2, curl)))
    assert errors[1][1] < errors[0][1]
    assert eoc(errors)[0] >= 0.8


def test_large_residual_raises(scatter_config, monkeypatch):
    monkeypatch.setattr(scatter, "RESIDUAL_LIMIT", -1.0)
    with pytest.raises(SolverError):
        solve_effective(scatter_config, build_scatter_mesh(scatter_config, 4))


def test_matrix_dump(scatter_config, tmp_path):
    solve_effective(scatter_config, build_scatter_mesh(scatter_config, 4), dump_dir=tmp_path)
    assert [p.name for p in tmp_path.iterdir()] == ["effective_n4_k4.mtx"]


def test_plane_slice_of_callable():
    wave = incident_plane_wave(3.0)
    plane = plane_slice(wave, UNIT_CELL, axis=1, offset=0.545, resolution=4)
    assert len(plane.s) == 16
    np.testing.assert_allclose(np.unique(plane.s), [0.125, 0.375, 0.625, 0.875])
    points = np.stack([plane.s, np.full(16, 0.545), plane.t], axis=1)
    np.testing.assert_allclose(plane.values, wave(points))


def test_plane_slice_of_discrete_field(scatter_config):
    mesh = build_scatter_mesh(scatter_config, 4)
    u = interpolate_edge(EdgeSpace(mesh), lambda x: np.broadcast_to(E3, x.shape))
    plane = plane_slice(u, UNIT_CELL, axis=2, offset=0.5, resolution=3)
    np.testing.assert_allclose(plane.values, np.broadcast_to(E3, (9, 3)), atol=1e-12)


def test_plane_slice_validation():
    with pytest.raises(GeometryError):
        plane_slice(incident_plane_wave(1.0), UNIT_CELL, axis=0, offset=1.5, resolution=4)
    with pytest.raises(ValueError):
        plane_slice(incident_plane_wave(1.0), UNIT_CELL, axis=3, offset=0.5, resolution=4)


def test_energy_balance_detects_a_wrong_absorption_sign(scatter_config):
    tensors = EffectiveTensors(eps_inv_hom=0.7 * np.eye(3), mu_hom=(0.9 + 0.2j) * np.eye(3), k=4.0)
    config = scatter_config.with_tensors(tensors)
    mesh = build_scatter_mesh(config, 4)
    solution = solve_effective(config, mesh)
    _, rhs = assemble_effective_system(config, mesh)
    flipped = config.with_tensors(
        EffectiveTensors(eps_inv_hom=tensors.eps_inv_hom, mu_hom=np.conj(tensors.mu_hom), k=4.0))

    balance = energy_balance(flipped, mesh, solution.u_H.coefficients, rhs)
    assert balance.absorption > 0.0
    assert balance.defect > 1e-3
    assert energy_balance(config, mesh, solution.u_H.coefficients, rhs).defect <= 1e-8
