"""Sparse storage, LSQR, dense LU and norm / singular value estimation.

Only :class:`CsrMatrix` is used to store large matrices. The products are
delegated to scipy's compiled CSR kernels over the same three arrays, so no
copy of the data is made.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .exceptions import (
    BreakdownError,
    DimensionError,
    NotConvergedError,
    SingularMatrixError,
)
from .rng import PortableRng

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Compressed sparse row matrix in canonical form.

    Column indices are strictly increasing inside each row. Arrays are made
    read-only on construction so instances can be shared freely.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        row_ptr = np.asarray(self.row_ptr, dtype=np.int64)
        col_idx = np.asarray(self.col_idx, dtype=np.int64)
        vals = np.asarray(self.vals, dtype=np.float64)
        if self.n_rows < 0 or self.n_cols < 0:
            raise DimensionError("negative matrix dimension")
        if row_ptr.shape != (self.n_rows + 1,):
            raise DimensionError("row_ptr must have length n_rows + 1")
        if row_ptr[0] != 0 or np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must start at 0 and be nondecreasing")
        if row_ptr[-1] != col_idx.size or col_idx.size != vals.size:
            raise ValueError("row_ptr[-1], len(col_idx) and len(vals) disagree")
        if col_idx.size:
            if col_idx.min() < 0 or col_idx.max() >= self.n_cols:
                raise ValueError("column index out of range")
            # strictly increasing within a row: every step that is not a row
            # boundary must be positive
            steps = np.diff(col_idx)
            starts = np.zeros(col_idx.size, dtype=bool)
            starts[row_ptr[1:-1][row_ptr[1:-1] < col_idx.size]] = True
            if np.any((steps <= 0) & ~starts[1:]):
                raise ValueError("column indices must be strictly increasing per row")
        for name, arr in (("row_ptr", row_ptr), ("col_idx", col_idx), ("vals", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_scipy(cls, m) -> CsrMatrix:
        m = scipy.sparse.csr_matrix(m, dtype=np.float64)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr.copy(), m.indices.copy(), m.data.copy())

    @classmethod
    def from_dense(cls, a) -> CsrMatrix:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        return cls.from_scipy(scipy.sparse.csr_matrix(a))

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, vals) -> CsrMatrix:
        """Build from triplets; duplicate entries are summed."""
        coo = scipy.sparse.coo_matrix(
            (np.asarray(vals, dtype=np.float64), (np.asarray(rows), np.asarray(cols))),
            shape=(n_rows, n_cols),
        )
        return cls.from_scipy(coo.tocsr())

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> CsrMatrix:
        return cls.diag(np.full(n, float(scale)))

    @classmethod
    def diag(cls, d) -> CsrMatrix:
        d = np.asarray(d, dtype=np.float64)
        n = d.size
        return cls(n, n, np.arange(n + 1), np.arange(n), d.copy())

    # -- views ------------------------------------------------------------

    @cached_property
    def _sp(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix(
            (self.vals, self.col_idx, self.row_ptr), shape=self.shape, copy=False
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @property
    def density(self) -> float:
        cells = self.n_rows * self.n_cols
        return self.nnz / cells if cells else 0.0

    def to_dense(self) -> np.ndarray:
        return self._sp.toarray()

    def to_coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_ptr))
        return rows, self.col_idx.copy(), self.vals.copy()

    def transpose(self) -> CsrMatrix:
        """Explicit transpose (a new matrix, not a view)."""
        return CsrMatrix.from_scipy(self._sp.T.tocsr())

    def abs(self) -> CsrMatrix:
        return CsrMatrix(self.n_rows, self.n_cols, self.row_ptr, self.col_idx, np.abs(self.vals))

    def matvec(self, v):
        return spmv(self, v)

    def rmatvec(self, v):
        return spmv_transpose(self, v)


def spmv(m: CsrMatrix, v) -> np.ndarray:
    """Return ``m @ v``."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (m.n_cols,):
        raise DimensionError(f"vector has shape {v.shape}, expected ({m.n_cols},)")
    return m._sp @ v


def spmv_transpose(m: CsrMatrix, v) -> np.ndarray:
    """Return ``m.T @ v`` without forming the transpose."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (m.n_rows,):
        raise DimensionError(f"vector has shape {v.shape}, expected ({m.n_rows},)")
    # csr_matrix.T is a zero-copy CSC view
    return m._sp.T @ v


# ---------------------------------------------------------------------------
# LSQR


@dataclass(frozen=True)
class IterSolveStatus:
    converged: bool
    iterations: int
    final_residual_norm: float


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise BreakdownError("non-finite value encountered in LSQR")


def _lsqr_pass(op, r, target, max_iter):
    """One Golub-Kahan bidiagonalization run on ``op d = r`` from ``d = 0``.

    Returns the correction, the iterations spent and the recurrence estimate
    of the final residual norm.
    """
    u = r.copy()
    beta = float(np.linalg.norm(u))
    d = np.zeros_like(r)
    if beta == 0.0:
        return d, 0, 0.0
    u /= beta
    v = np.asarray(op.rmatvec(u), dtype=np.float64)
    alpha = float(np.linalg.norm(v))
    _check_finite(v)
    if alpha == 0.0:
        # r is orthogonal to the range: nothing to gain
        return d, 0, beta
    v /= alpha
    w = v.copy()
    phibar = beta
    rhobar = alpha

    itn = 0
    while itn < max_iter:
        itn += 1
        u = np.asarray(op.matvec(v), dtype=np.float64) - alpha * u
        beta = float(np.linalg.norm(u))
        if beta > 0.0:
            u /= beta
            v = np.asarray(op.rmatvec(u), dtype=np.float64) - beta * v
            alpha = float(np.linalg.norm(v))
            if alpha > 0.0:
                v /= alpha

        rho = math.hypot(rhobar, beta)
        c = rhobar / rho
        s = beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar

        d += (phi / rho) * w
        w = v - (theta / rho) * w
        if not (math.isfinite(phibar) and math.isfinite(rho)):
            raise BreakdownError("non-finite recurrence in LSQR")

        if phibar <= target or beta == 0.0 or alpha == 0.0:
            break
    _check_finite(d)
    return d, itn, phibar


def lsqr(op, b, x0=None, abs_residual_target=0.0, max_inner=None, max_restarts=8):
    """Solve ``op x = b`` by LSQR until ``||op x - b||_2 <= abs_residual_target``.

    ``op`` is anything with ``matvec`` and ``rmatvec``. A warm start ``x0`` is
    handled by solving for the correction ``d = x - x0`` against the shifted
    right-hand side ``b - op x0``.

    The residual of every candidate is recomputed explicitly. When the
    recurrence estimate claims convergence but the true residual disagrees,
    the bidiagonalization is restarted from the true residual (at most
    ``max_restarts`` times, and only while it keeps making progress).

    Returns
    -------
    x : ndarray
        The iterate with the smallest verified residual.
    status : IterSolveStatus
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    if abs_residual_target < 0:
        raise ValueError("abs_residual_target must be nonnegative")
    if max_inner is None:
        max_inner = 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != b.shape:
        raise DimensionError("x0 and b differ in shape")
    _check_finite(b, x)

    r = b - op.matvec(x)
    rnorm = float(np.linalg.norm(r))
    best_x, best_rnorm = x, rnorm
    used = 0
    restarts = 0
    while rnorm > abs_residual_target and used < max_inner and restarts <= max_restarts:
        d, k, _ = _lsqr_pass(op, r, abs_residual_target, max_inner - used)
        used += k
        x_new = x + d
        r_new = b - op.matvec(x_new)
        _check_finite(r_new)
        new_rnorm = float(np.linalg.norm(r_new))
        if new_rnorm < best_rnorm:
            best_x, best_rnorm = x_new, new_rnorm
        if k == 0 or new_rnorm >= rnorm:
            # stagnated at the attainable accuracy for this system
            break
        x, r, rnorm = x_new, r_new, new_rnorm
        restarts += 1
    converged = best_rnorm <= abs_residual_target
    return best_x, IterSolveStatus(converged, used, best_rnorm)


# ---------------------------------------------------------------------------
# dense direct solve


def _dense(m) -> np.ndarray:
    if isinstance(m, CsrMatrix):
        return m.to_dense()
    return np.array(m, dtype=np.float64)


def lu_factor(m):
    """LU with partial pivoting of a dense copy of ``m``.

    Raises :class:`SingularMatrixError` if a pivot is zero or below
    ``n * eps * max|m_ij|``.
    """
    a = _dense(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"square matrix required, got {a.shape}")
    n = a.shape[0]
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("matrix is zero")
    with warnings.catch_warnings():
        # singularity is diagnosed below with a scaled pivot test
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, overwrite_a=True, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= max(n, 1) * _EPS * scale:
        raise SingularMatrixError(f"numerically singular (pivot {pivots.min():.3g})")
    return lu, piv


def dense_lu_solve(m, b) -> np.ndarray:
    """Solve ``m x = b`` by LU with partial pivoting on a dense copy."""
    b = np.asarray(b, dtype=np.float64)
    factors = lu_factor(m)
    if b.shape != (factors[0].shape[0],):
        raise DimensionError("right-hand side has the wrong length")
    return scipy.linalg.lu_solve(factors, b, check_finite=False)


def dense_inverse(m) -> np.ndarray:
    factors = lu_factor(m)
    return scipy.linalg.lu_solve(factors, np.eye(factors[0].shape[0]), check_finite=False)


# ---------------------------------------------------------------------------
# norms and extreme singular values


def matrix_norm(m: CsrMatrix, kind: str = "one") -> float:
    """Induced 1-norm (max column sum) or inf-norm (max row sum)."""
    if kind not in ("one", "inf"):
        raise ValueError(f"unknown norm kind {kind!r}")
    if m.nnz == 0:
        return 0.0
    a = np.abs(m.vals)
    if kind == "inf":
        sums = np.add.reduceat(a, m.row_ptr[:-1][np.diff(m.row_ptr) > 0])
    else:
        sums = np.bincount(m.col_idx, weights=a, minlength=m.n_cols)
    return float(sums.max())


def _start_vector(n, seed):
    v = PortableRng(seed, stream=0xE16).uniform(n, -1.0, 1.0)
    return v / np.linalg.norm(v)


def _rayleigh_power(apply, n, seed, tol, max_iter):
    """Power iteration on a symmetric PSD operator.

    Returns ``(mu, v, converged)`` with the last Rayleigh quotient and vector.
    """
    v = _start_vector(n, seed)
    mu_prev = None
    mu = 0.0
    for _ in range(max_iter):
        w = apply(v)
        mu = float(v @ w)
        wn = float(np.linalg.norm(w))
        if not math.isfinite(wn):
            raise BreakdownError("non-finite iterate in power iteration")
        if wn == 0.0:
            return 0.0, v, True
        v = w / wn
        if mu_prev is not None and abs(mu - mu_prev) <= tol * abs(mu):
            return mu, v, True
        mu_prev = mu
    return mu, v, False


def _dominant_eigenvalue(apply, n, seed, tol, max_iter, what):
    """Largest eigenvalue of a symmetric PSD operator.

    Power iteration first; if the top of the spectrum is too clustered for it
    to settle within ``max_iter`` steps, its last vector seeds a Lanczos
    (ARPACK) solve to the same relative tolerance.
    """
    mu, v, converged = _rayleigh_power(apply, n, seed, tol, max_iter)
    if converged:
        return mu
    if n <= 2:
        raise NotConvergedError(f"{what} did not converge in {max_iter} iterations")
    op = scipy.sparse.linalg.LinearOperator((n, n), matvec=apply, dtype=np.float64)
    try:
        vals = scipy.sparse.linalg.eigsh(
            op, k=1, which="LA", v0=v, tol=tol, maxiter=max_iter, return_eigenvectors=False
        )
    except scipy.sparse.linalg.ArpackNoConvergence:
        raise NotConvergedError(f"{what} did not converge in {max_iter} iterations") from None
    return float(vals[0])


def extreme_singular_values(m, tol=1e-12, max_iter=2000, seed=0):
    """Largest and smallest singular values of a square matrix.

    The largest comes from power iteration on ``m.T m``, the smallest from
    inverse power iteration on ``m.T m`` with one dense LU factorization
    reused for both triangular solves. ``tol`` bounds the relative change of
    the Rayleigh quotient between consecutive steps. Clustered extreme values
    fall back to Lanczos started from the power iterate.

    Returns
    -------
    (sv_max, sv_min)
    """
    if not isinstance(m, CsrMatrix):
        m = CsrMatrix.from_dense(m)
    if m.n_rows != m.n_cols:
        raise DimensionError("square matrix required")
    n = m.n_rows
    lam_max = _dominant_eigenvalue(
        lambda v: spmv_transpose(m, spmv(m, v)), n, seed, tol, max_iter, "sv_max"
    )
    factors = lu_factor(m)

    def inv_gram(v):
        y = scipy.linalg.lu_solve(factors, v, trans=1, check_finite=False)
        return scipy.linalg.lu_solve(factors, y, check_finite=False)

    lam_inv = _dominant_eigenvalue(inv_gram, n, seed + 1, tol, max_iter, "sv_min")
    return math.sqrt(lam_max), 1.0 / math.sqrt(lam_inv)


def inverse_norm_2(m, **kwargs) -> float:
    """``||m^{-1}||_2`` as the reciprocal of the smallest singular value."""
    return 1.0 / extreme_singular_values(m, **kwargs)[1]


def dense_norm(a: np.ndarray, kind: str) -> float:
    """Induced norm of a small dense matrix; ``kind`` is one, inf or two."""
    order = {"one": 1, "inf": np.inf, "two": 2}[kind]
    return float(np.linalg.norm(a, order))
