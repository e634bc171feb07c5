"""Complete-pivoting Cholesky for SPD matrices and the discrete Lipschitz constant."""

from dataclasses import dataclass

import numpy as np

from .cholesky import BREAKDOWN_RTOL, TIE_RTOL, argmax_first
from .errors import BreakdownError
from .geometry import CandidateGrid, Domain
from .kernels import Kernel

VALIDATION_LIMIT = 2000


class SpdMatrix:
    """A validated symmetric positive (semi)definite matrix.

    ``psd_ok`` accepts singular PSD input; ``validate=False`` skips the
    eigenvalue check (always skipped above ``VALIDATION_LIMIT``).
    """

    def __init__(self, entries, validate=True, psd_ok=False):
        A = np.array(entries, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise ValueError(f"expected a nonempty square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix has non-finite entries")
        scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
        if np.max(np.abs(A - A.T)) > 1e-12 * scale:
            raise ValueError("matrix is not symmetric")
        A = 0.5 * (A + A.T)
        self.singular = False
        if validate and A.shape[0] <= VALIDATION_LIMIT:
            lam = np.linalg.eigvalsh(A)
            trace = float(np.trace(A))
            if lam[0] < -1e-10 * trace:
                raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {lam[0]:.3e})")
            if lam[0] <= 1e-14 * max(trace, scale):
                if not psd_ok:
                    raise ValueError("matrix is singular; pass psd_ok=True to accept it")
                self.singular = True
        A.flags.writeable = False
        self.entries = A

    @property
    def order(self):
        return self.entries.shape[0]

    @classmethod
    def read(cls, path, **kw):
        """Parse the text format: the order ``m`` on the first line, then ``m`` rows of ``m`` numbers."""
        with open(path) as fh:
            lines = [ln.split() for ln in fh if ln.strip()]
        if not lines or len(lines[0]) != 1:
            raise ValueError(f"{path}: first line must hold the matrix order")
        m = int(lines[0][0])
        rows = lines[1:]
        if len(rows) != m or any(len(r) != m for r in rows):
            raise ValueError(f"{path}: expected {m} rows of {m} entries")
        return cls(np.array(rows, dtype=float), **kw)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(f"{self.order}\n")
            for row in self.entries:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def discrete_lipschitz(A):
    """``max_{i != j} |A_ii - A_ij| / |i - j|``."""
    A = A.entries if isinstance(A, SpdMatrix) else np.asarray(A, dtype=float)
    m = A.shape[0]
    if m < 2:
        raise ValueError("need a matrix of order at least 2")
    idx = np.arange(m)
    gap = np.abs(idx[:, None] - idx[None, :]).astype(float)
    np.fill_diagonal(gap, np.inf)
    return float(np.max(np.abs(np.diag(A)[:, None] - A) / gap))


@dataclass
class MatrixFactorization:
    """``A_n = factor @ factor.T`` with ``factor`` of shape ``(m, n)``."""

    pivots: list
    factor: np.ndarray
    residual_diag: np.ndarray

    @property
    def rank(self):
        return len(self.pivots)

    def approximant(self):
        return self.factor @ self.factor.T


def matrix_pivoted_cholesky(A, n, callback=None):
    """``n`` steps of complete-pivoting Cholesky on ``A``.

    ``callback(fact)`` is invoked after every step with the partial factorization.
    """
    M = A.entries if isinstance(A, SpdMatrix) else np.asarray(A, dtype=float)
    m = M.shape[0]
    if not 0 <= n <= m:
        raise ValueError(f"rank {n} outside [0, {m}]")
    diag = np.diag(M).copy()
    d_max = float(np.max(diag))
    floor = BREAKDOWN_RTOL * d_max
    factor = np.zeros((m, n))
    pivots = []
    for k in range(n):
        p = argmax_first(diag, TIE_RTOL * d_max)
        d = diag[p]
        if not d > floor:
            raise BreakdownError(f"pivot value {d:.3e} at step {k + 1} is below the breakdown tolerance",
                                 step=k)
        col = M[:, p] - factor[:, :k] @ factor[p, :k]
        col /= np.sqrt(d)
        factor[:, k] = col
        diag -= col * col
        pivots.append(int(p))
        diag[pivots] = 0.0
        if callback is not None:
            callback(MatrixFactorization(list(pivots), factor[:, : k + 1], diag.copy()))
    return MatrixFactorization(pivots, factor, diag)


def residual_max_entry(fact, A):
    """``max_ij |A - A_n|_ij`` computed densely."""
    M = A.entries if isinstance(A, SpdMatrix) else np.asarray(A, dtype=float)
    return float(np.max(np.abs(M - fact.approximant())))


def matrix_bound(m, G, n):
    """``4 (m - 1) G / (n - 1)`` for ``n > 1``."""
    if n <= 1:
        raise ValueError("bound holds for n > 1")
    return 4.0 * (m - 1) * G / (n - 1)


def matrix_as_kernel(A):
    """View ``A`` as a kernel on the index grid ``{1, ..., m}`` (1-d points)."""
    M = A.entries if isinstance(A, SpdMatrix) else np.asarray(A, dtype=float)
    m = M.shape[0]

    def func(X, Y):
        i = np.rint(X[..., 0]).astype(int) - 1
        j = np.rint(Y[..., 0]).astype(int) - 1
        return M[i, j]

    domain = Domain.cube(1.0, float(max(m, 2)), 1)
    kernel = Kernel("matrix", 1, func, domain, discrete_lipschitz(M) if m > 1 else 0.0)
    grid = CandidateGrid(np.arange(1, m + 1, dtype=float)[:, None], 0.5, domain, (m,))
    return kernel, grid


def brownian_matrix(m):
    """``A_ij = min(i, j) / m`` for ``1 <= i, j <= m``."""
    idx = np.arange(1, m + 1)
    return SpdMatrix(np.minimum.outer(idx, idx) / m)
