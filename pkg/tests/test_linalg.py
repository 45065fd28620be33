import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
from src.config.settings import SolverSettings
from src.errors import SingularMatrixError
from src.linalg.components import as_csr, dump_matrix_market, is_structurally_symmetric, spmv, symmetry_defect
from src.linalg.factory import SolverFactory
from src.linalg.solvers import direct, krylov
from src.linalg.solvers.direct import DirectSolver
from src.linalg.solvers.krylov import GmresSolver, cg_projected


def _system(n=40, seed=0):
    rng = np.random.default_rng(seed)
    dense = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    dense[np.abs(dense) < 1.5] = 0.0
    A = sp.csr_matrix(dense + 4.0 * n * np.eye(n))
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    return A, b


def _ring_laplacian(n):
    shift = sp.diags([np.ones(n - 1)], [1], shape=(n, n)).tolil()
    shift[n - 1, 0] = 1.0
    shift = shift.tocsr()
    return (2.0 * sp.eye(n) - shift - shift.T).tocsr()


def test_direct_solve():
    A, b = _system()
    x, report = DirectSolver().solve(A, b)
    assert report.converged
    assert report.residual <= 1e-12
    np.testing.assert_allclose(A @ x, b, atol=1e-10)


def test_factorization_reused_for_several_right_hand_sides():
    A, _ = _system(seed=1)
    rhs = np.random.default_rng(2).normal(size=(A.shape[0], 3))
    x, report = DirectSolver().factorize(A).solve(rhs)
    assert x.shape == rhs.shape
    assert report.converged
    np.testing.assert_allclose(A @ x, rhs, atol=1e-10)


def test_zero_row_reports_its_index():
    A = sp.csr_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]]))
    with pytest.raises(SingularMatrixError) as info:
        DirectSolver().solve(A, np.ones(3))
    assert info.value.row == 2


def test_singular_matrix():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrixError):
        DirectSolver().factorize(A)


def test_non_square_matrix():
    with pytest.raises(ValueError):
        DirectSolver().solve(sp.csr_matrix(np.ones((2, 3))), np.ones(2))


def test_gmres_converges():
    A, b = _system(seed=3)
    x, report = GmresSolver(SolverSettings(kind="gmres", rtol=1e-10)).solve(A, b)
    assert report.converged
    assert np.linalg.norm(A @ x - b) <= 1e-8 * np.linalg.norm(b)


@pytest.mark.parametrize("ordering", ["MMD_AT_PLUS_A", "COLAMD", "MMD_ATA", "NATURAL"])
def test_direct_solve_with_each_ordering(ordering, monkeypatch):
    used = []
    splu = direct.spla.splu

    def recording(A, permc_spec):
        used.append(permc_spec)
        return splu(A, permc_spec=permc_spec)

    monkeypatch.setattr(direct.spla, "splu", recording)
    A, b = _system(seed=4)
    _, report = DirectSolver(SolverSettings(ordering=ordering)).solve(A, b)
    assert used == [ordering]
    assert report.residual <= 1e-12


def test_default_ordering_is_symmetric_minimum_degree():
    assert SolverSettings().ordering == "MMD_AT_PLUS_A"


@pytest.mark.parametrize("maxit, restart, cycles, inner", [(250, 100, 3, 100), (200, 100, 2, 100), (50, 100, 1, 50)])
def test_gmres_iteration_limit_counts_inner_iterations(maxit, restart, cycles, inner, monkeypatch):
    calls = []

    def recording(A, b, **kwargs):
        calls.append(kwargs)
        return np.zeros_like(b), 1

    monkeypatch.setattr(krylov.spla, "gmres", recording)
    A, b = _system(seed=5)
    _, report = GmresSolver(SolverSettings(kind="gmres", maxit=maxit, restart=restart)).solve(A, b)
    assert calls[0]["restart"] == inner
    assert calls[0]["maxiter"] == cycles
    assert not report.converged

def test_factory():
    assert isinstance(SolverFactory.create(), DirectSolver)
    assert isinstance(SolverFactory.create(SolverSettings(kind="gmres")), GmresSolver)


def test_cg_projected_on_consistent_singular_system():
    n = 30
    A = _ring_laplacian(n)
    b = np.random.default_rng(4).normal(size=n)
    b -= b.mean()
    x, report = cg_projected(A, b, lambda v: v - v.mean(), tol=1e-12, maxit=500)
    assert report.converged
    np.testing.assert_allclose(A @ x, b, atol=1e-9)
    assert abs(x.mean()) < 1e-12


def test_cg_projected_flags_inconsistent_right_hand_side():
    n = 30
    A = _ring_laplacian(n)
    b = np.ones(n)
    b[0] += 1.0
    _, report = cg_projected(A, b, lambda v: v - v.mean(), tol=1e-12, maxit=500)
    assert not report.converged


def test_cg_projected_round_off_load_returns_zero():
    A = _ring_laplacian(10)
    b = np.full(10, 1e-18)
    x, report = cg_projected(A, b, lambda v: v - v.mean(), tol=1e-10, atol=1e-12)
    assert report.converged and report.iterations == 0
    assert not np.any(x)


def test_symmetry_helpers():
    A = sp.csr_matrix(np.array([[2.0, 1j], [1j, 3.0]]))
    assert symmetry_defect(A) == 0.0
    assert is_structurally_symmetric(A)
    B = sp.csr_matrix(np.array([[2.0, 1.0], [0.5, 3.0]]))
    assert symmetry_defect(B) == pytest.approx(0.5)


def test_spmv_dimension_check():
    A = as_csr(sp.eye(3))
    np.testing.assert_allclose(spmv(A, np.arange(3.0)), np.arange(3.0))
    with pytest.raises(ValueError):
        spmv(A, np.ones(4))


def test_matrix_market_dump(tmp_path):
    A, _ = _system(n=8, seed=5)
    path = dump_matrix_market(A, tmp_path / "system", comment="test system")
    assert path.suffix == ".mtx"
    loaded = scipy.io.mmread(str(path))
    np.testing.assert_allclose(sp.csr_matrix(loaded).toarray(), A.toarray())
