"""Sparse storage and linear solvers.

CSR storage keeps the stiffness operator and the backward-Euler system
matrix; systems are solved with a hand-rolled Bi-CGSTAB (shadow residual
fixed to the initial residual, so runs are deterministic) with a dense
LU fallback used for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "CsrMatrix",
    "SolveReport",
    "SolverError",
    "BreakdownError",
    "NonConvergenceError",
    "SingularMatrixError",
    "spmv",
    "bicgstab",
    "dense_solve",
    "density",
    "diag_minus_scaled",
]

_BREAKDOWN = 1e-300


class SolverError(RuntimeError):
    pass


class BreakdownError(SolverError):
    """Bi-CGSTAB inner product collapsed to zero."""

    def __init__(self, iteration, what):
        self.iteration = iteration
        super().__init__(f"Bi-CGSTAB breakdown at iteration {iteration}: {what}")


class NonConvergenceError(SolverError):
    """Raised by callers that require a converged solve."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"solver did not converge in {report.iterations} iterations "
            f"(relative residual {report.final_residual:.3e})"
        )


class SingularMatrixError(SolverError):
    pass


@dataclass
class CsrMatrix:
    """Compressed sparse row matrix with immutable-by-convention arrays."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _sp: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.row_offsets = np.asarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(self.col_indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.row_offsets.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets must have length n_rows + 1")
        if np.any(np.diff(self.row_offsets) < 0) or self.row_offsets[0] != 0:
            raise ValueError("row_offsets must be monotone starting at 0")
        if self.row_offsets[-1] != self.col_indices.shape[0]:
            raise ValueError("last offset must equal nnz")
        if self.col_indices.shape != self.values.shape:
            raise ValueError("col_indices and values must have matching length")
        if self.col_indices.size and (
            self.col_indices.min() < 0 or self.col_indices.max() >= self.n_cols
        ):
            raise ValueError("column index out of range")
        for r in range(self.n_rows):
            lo, hi = self.row_offsets[r], self.row_offsets[r + 1]
            if np.any(np.diff(self.col_indices[lo:hi]) <= 0):
                raise ValueError(f"columns of row {r} are not strictly increasing")

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, vals, drop_tol_rel=0.0):
        """Build from triplets: duplicates summed, columns sorted per row.

        Entries with magnitude below ``drop_tol_rel * max|value|`` are
        discarded after accumulation.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if rows.size:
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
            first = np.ones(rows.size, dtype=bool)
            first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.where(first)[0]
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
            if drop_tol_rel > 0.0 and vals.size:
                keep = np.abs(vals) >= drop_tol_rel * np.abs(vals).max()
                rows, cols, vals = rows[keep], cols[keep], vals[keep]
        offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(offsets, rows + 1, 1)
        np.cumsum(offsets, out=offsets)
        return cls(n_rows, n_cols, offsets, cols, vals)

    @classmethod
    def identity(cls, n):
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    def scipy(self) -> sp.csr_matrix:
        """SciPy view sharing this matrix's arrays (cached)."""
        if self._sp is None:
            self._sp = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets),
                shape=(self.n_rows, self.n_cols),
            )
        return self._sp

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        for r in range(self.n_rows):
            lo, hi = self.row_offsets[r], self.row_offsets[r + 1]
            out[r, self.col_indices[lo:hi]] = self.values[lo:hi]
        return out


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool


def spmv(A: CsrMatrix, x) -> np.ndarray:
    """y = A x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise ValueError(f"dimension mismatch: matrix is {A.n_rows}x{A.n_cols}, vector {x.shape}")
    return A.scipy() @ x


def density(A: CsrMatrix) -> float:
    """Stored-entry percentage, 0 for an empty matrix."""
    cells = A.n_rows * A.n_cols
    if cells == 0:
        return 0.0
    return 100.0 * A.nnz / cells


def diag_minus_scaled(diag, M: CsrMatrix, tau: float) -> CsrMatrix:
    """CSR form of diag(d) - tau * M."""
    diag = np.asarray(diag, dtype=np.float64)
    n = diag.shape[0]
    if M.n_rows != n or M.n_cols != n:
        raise ValueError("diagonal and matrix sizes differ")
    rows = np.concatenate([np.arange(n), np.repeat(np.arange(n), np.diff(M.row_offsets))])
    cols = np.concatenate([np.arange(n), M.col_indices])
    vals = np.concatenate([diag, -tau * M.values])
    return CsrMatrix.from_coo(n, n, rows, cols, vals)


def bicgstab(A0: CsrMatrix, b, x0=None, tol=1e-10, maxit=100):
    """Bi-CGSTAB with shadow residual r_hat = r_0.

    Converges when the relative residual ||b - A0 x|| / ||b|| drops to
    ``tol``; the recurrence residual is replaced by the true residual every
    25 iterations (and before declaring convergence) to guard drift. Runs
    out of iterations: returns the current iterate with a non-converged
    report. An early exit is taken after the s-update when ||s|| already
    meets the tolerance.
    """
    if A0.n_rows != A0.n_cols:
        raise ValueError("Bi-CGSTAB requires a square system")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A0.n_rows,):
        raise ValueError("right-hand side length mismatch")
    Asp = A0.scipy()
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True)

    r = b - Asp @ x
    if np.linalg.norm(r) / bnorm <= tol:
        return x, SolveReport(0, float(np.linalg.norm(r) / bnorm), True)
    r_hat = r.copy()
    rho_prev = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)

    for i in range(1, maxit + 1):
        rho = float(r_hat @ r)
        if abs(rho) < _BREAKDOWN:
            raise BreakdownError(i, "rho = (r_hat, r) vanished")
        beta = (rho / rho_prev) * (alpha / omega)
        p = r + beta * (p - omega * v)
        v = Asp @ p
        rv = float(r_hat @ v)
        if abs(rv) < _BREAKDOWN:
            raise BreakdownError(i, "(r_hat, v) vanished")
        alpha = rho / rv
        s = r - alpha * v
        if np.linalg.norm(s) <= tol * bnorm:
            x_try = x + alpha * p
            res = float(np.linalg.norm(b - Asp @ x_try) / bnorm)
            if res <= tol:
                return x_try, SolveReport(i, res, True)
        t0 = Asp @ s
        tt = float(t0 @ t0)
        if tt < _BREAKDOWN:
            raise BreakdownError(i, "(t, t) vanished with nonzero s")
        omega = float(t0 @ s) / tt
        x = x + alpha * p + omega * s
        r = s - omega * t0
        if i % 25 == 0:
            r = b - Asp @ x
        if np.linalg.norm(r) <= tol * bnorm:
            res = float(np.linalg.norm(b - Asp @ x) / bnorm)
            if res <= tol:
                return x, SolveReport(i, res, True)
            r = b - Asp @ x
        rho_prev = rho

    res = float(np.linalg.norm(b - Asp @ x) / bnorm)
    return x, SolveReport(maxit, res, False)


def dense_solve(A0, b) -> np.ndarray:
    """LU with partial pivoting on a dense matrix."""
    A0 = np.asarray(A0, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
        raise ValueError("dense_solve requires a square matrix")
    if b.shape != (A0.shape[0],):
        raise ValueError("right-hand side length mismatch")
    try:
        return np.linalg.solve(A0, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
