import numpy as np
import pytest

from cvfrac.solver import (
    BreakdownError,
    CsrMatrix,
    SingularMatrixError,
    bicgstab,
    dense_solve,
    density,
    diag_minus_scaled,
    spmv,
)


def _random_csr(rng, n, m, fill=0.2):
    dense = np.where(rng.random((n, m)) < fill, rng.normal(size=(n, m)), 0.0)
    rows, cols = np.nonzero(dense)
    return CsrMatrix.from_coo(n, m, rows, cols, dense[rows, cols]), dense


def test_spmv_identity():
    I = CsrMatrix.identity(7)
    x = np.arange(7.0)
    np.testing.assert_array_equal(spmv(I, x), x)


def test_spmv_zero_matrix():
    Z = CsrMatrix.from_coo(4, 4, [], [], [])
    np.testing.assert_array_equal(spmv(Z, np.ones(4)), np.zeros(4))


def test_spmv_matches_dense(rng):
    A, dense = _random_csr(rng, 50, 50)
    for _ in range(5):
        x = rng.normal(size=50)
        assert np.abs(spmv(A, x) - dense @ x).max() <= 1e-14 * max(1.0, np.abs(dense @ x).max())


def test_spmv_linearity(rng):
    A, _ = _random_csr(rng, 30, 30)
    x, y = rng.normal(size=30), rng.normal(size=30)
    a, b = 1.7, -0.4
    lhs = spmv(A, a * x + b * y)
    rhs = a * spmv(A, x) + b * spmv(A, y)
    scale = np.abs(rhs).max()
    assert np.abs(lhs - rhs).max() <= 1e-13 * max(1.0, scale)


def test_spmv_dimension_mismatch():
    A = CsrMatrix.identity(3)
    with pytest.raises(ValueError):
        spmv(A, np.ones(4))


def test_csr_invariants_enforced():
    with pytest.raises(ValueError):
        CsrMatrix(2, 2, [0, 1], [0], [1.0])  # offsets too short
    with pytest.raises(ValueError):
        CsrMatrix(1, 2, [0, 2], [1, 0], [1.0, 2.0])  # unsorted columns
    with pytest.raises(ValueError):
        CsrMatrix(1, 2, [0, 1], [5], [1.0])  # column out of range


def test_from_coo_sums_duplicates_and_drops():
    A = CsrMatrix.from_coo(2, 2, [0, 0, 1], [0, 0, 1], [1.0, 2.0, 1e-20], drop_tol_rel=1e-15)
    assert A.nnz == 1
    assert A.toarray()[0, 0] == 3.0


def test_diag_minus_scaled():
    M = CsrMatrix.from_coo(2, 2, [0, 0, 1], [0, 1, 0], [1.0, 2.0, 3.0])
    A0 = diag_minus_scaled(np.array([5.0, 7.0]), M, 0.5)
    np.testing.assert_allclose(A0.toarray(), [[4.5, -1.0], [-1.5, 7.0]])


def test_bicgstab_identity_converges_immediately():
    I = CsrMatrix.identity(5)
    b = np.arange(1.0, 6.0)
    x, report = bicgstab(I, b)
    assert report.converged
    assert report.iterations <= 1
    np.testing.assert_allclose(x, b, rtol=1e-12)


def test_bicgstab_zero_rhs():
    I = CsrMatrix.identity(3)
    x, report = bicgstab(I, np.zeros(3))
    assert report.converged and report.iterations == 0
    np.testing.assert_array_equal(x, np.zeros(3))


def test_bicgstab_vs_dense_random(rng):
    n = 200
    dense = rng.normal(size=(n, n)) * 0.3
    dense[np.arange(n), np.arange(n)] = n * 0.5 + rng.random(n)
    rows, cols = np.nonzero(dense)
    A = CsrMatrix.from_coo(n, n, rows, cols, dense[rows, cols])
    b = rng.normal(size=n)
    x, report = bicgstab(A, b, tol=1e-12, maxit=200)
    assert report.converged
    x_ref = dense_solve(dense, b)
    assert np.abs(x - x_ref).max() <= 1e-8


def test_bicgstab_report_residual_honest(rng):
    n = 50
    A, dense = _random_csr(rng, n, n, fill=0.3)
    dense[np.arange(n), np.arange(n)] += n
    rows, cols = np.nonzero(dense)
    A = CsrMatrix.from_coo(n, n, rows, cols, dense[rows, cols])
    b = rng.normal(size=n)
    x, report = bicgstab(A, b, tol=1e-10)
    assert report.converged
    true_res = np.linalg.norm(b - dense @ x) / np.linalg.norm(b)
    assert report.final_residual <= 1e-10
    assert true_res == pytest.approx(report.final_residual, rel=1e-6, abs=1e-14)


def test_bicgstab_maxit_returns_nonconverged():
    # an indefinite system won't converge in a single iteration
    rng = np.random.default_rng(7)
    n = 40
    dense = rng.normal(size=(n, n))
    rows, cols = np.nonzero(dense)
    A = CsrMatrix.from_coo(n, n, rows, cols, dense[rows, cols])
    b = rng.normal(size=n)
    x, report = bicgstab(A, b, tol=1e-14, maxit=1)
    assert not report.converged
    assert report.iterations == 1
    assert x.shape == (n,)


def test_bicgstab_deterministic(rng):
    n = 80
    A, dense = _random_csr(rng, n, n, fill=0.25)
    dense[np.arange(n), np.arange(n)] += n
    rows, cols = np.nonzero(dense)
    A = CsrMatrix.from_coo(n, n, rows, cols, dense[rows, cols])
    b = rng.normal(size=n)
    x1, r1 = bicgstab(A, b)
    x2, r2 = bicgstab(A, b)
    assert r1.iterations == r2.iterations
    np.testing.assert_array_equal(x1, x2)


def test_breakdown_raises():
    # r_hat orthogonal to r after one step of this contrived system is hard
    # to arrange; instead force rho = 0 via b = 0-adjacent trick: A x0 = b
    # exactly makes r = 0 and the solver returns before iterating, so use a
    # nilpotent-like matrix in which (r_hat, v) vanishes.
    A = CsrMatrix.from_coo(2, 2, [0, 1], [1, 0], [1.0, -1.0])  # rotation by 90 degrees
    b = np.array([1.0, 1.0])
    with pytest.raises(BreakdownError):
        bicgstab(A, b, tol=1e-16, maxit=10)


def test_dense_solve_identity():
    b = np.array([3.0, -1.0])
    np.testing.assert_allclose(dense_solve(np.eye(2), b), b)


def test_dense_solve_diagonal():
    A = np.array([[2.0, 0.0], [0.0, 4.0]])
    np.testing.assert_allclose(dense_solve(A, np.array([2.0, 8.0])), [1.0, 2.0])


def test_dense_solve_singular():
    with pytest.raises(SingularMatrixError):
        dense_solve(np.zeros((2, 2)), np.ones(2))


def test_density_values():
    full = CsrMatrix.from_coo(4, 4, *np.nonzero(np.ones((4, 4))), np.ones(16))
    assert density(full) == 100.0
    assert density(CsrMatrix.identity(10)) == pytest.approx(10.0)
    assert density(CsrMatrix.from_coo(0, 0, [], [], [])) == 0.0
