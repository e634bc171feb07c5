"""Incremental pivoted Cholesky on a candidate grid.

The residual kernel is never formed.  After ``n`` steps the state holds the
normalized factor columns ``c_i(x) = R_{i-1}(x, z_i) / sqrt(R_{i-1}(z_i, z_i))``
on every grid point, so that

    R_n(x, y) = K(x, y) - sum_i c_i(x) c_i(y),

and the diagonal ``R_n(x, x)`` on the grid is kept up to date with one
subtraction per step.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import BreakdownError, NumericalError

BREAKDOWN_RTOL = 1e-12
NEGATIVE_RTOL = 1e-12
TIE_RTOL = 1e-12


class _RowBuffer:
    """Append-only row storage shared by a chain of states."""

    def __init__(self, width, capacity=16):
        self.data = np.empty((capacity, width))
        self.length = 0

    def append(self, row, n):
        # a state that is not the tip of the chain must not overwrite rows
        if n != self.length:
            raise RuntimeError("buffer is owned by a later state")
        if n == self.data.shape[0]:
            grown = np.empty((2 * n, self.data.shape[1]))
            grown[:n] = self.data[:n]
            self.data = grown
        self.data[n] = row
        self.length = n + 1

    def fork(self, n):
        new = _RowBuffer(self.data.shape[1], max(16, 2 * n))
        new.data[:n] = self.data[:n]
        new.length = n
        return new


def argmax_first(values, atol):
    """Lowest index whose value is within ``atol`` of the maximum."""
    top = np.max(values)
    return int(np.flatnonzero(values >= top - atol)[0])


class CholeskyState:
    """Pivoted Cholesky factorization of ``kernel`` restricted to ``grid``.

    States behave as values: :meth:`step` returns a new state and leaves
    this one usable.  Consecutive states share their column storage.
    """

    def __init__(self, kernel, grid, *, _diag=None, _k_max=None, _buffer=None,
                 _pivots=(), _values=()):
        self.kernel = kernel
        self.grid = grid
        if _diag is None:
            if grid.size == 0:
                raise ValueError("empty candidate grid")
            if kernel.dim != grid.dim:
                raise ValueError(f"kernel dimension {kernel.dim} does not match grid dimension {grid.dim}")
            _diag = np.asarray(kernel.diagonal(grid.points), dtype=float)
            bad = np.flatnonzero(~np.isfinite(_diag))
            if bad.size:
                raise NumericalError(f"non-finite kernel value at grid point {grid.points[bad[0]].tolist()}")
            if np.any(_diag < 0):
                raise NumericalError("kernel diagonal is negative")
            _k_max = float(np.max(_diag))
            _buffer = _RowBuffer(grid.size)
        _diag.flags.writeable = False
        self.diag_residual = _diag
        self.k_max = _k_max
        self._buffer = _buffer
        self.pivots = tuple(_pivots)
        self.pivot_values = tuple(_values)

    @property
    def n(self):
        return len(self.pivots)

    @property
    def breakdown_tol(self):
        return BREAKDOWN_RTOL * self.k_max

    @property
    def columns(self):
        """Factor columns as an ``(n, grid.size)`` read-only array."""
        view = self._buffer.data[: self.n]
        view = view.view()
        view.flags.writeable = False
        return view

    @property
    def pivot_points(self):
        return self.grid.points[list(self.pivots)]

    @property
    def cross_matrix(self):
        """Lower-triangular ``n x n`` matrix with entries ``c_j(z_i)``; its Gram is ``K(Z, Z)``."""
        if self.n == 0:
            return np.zeros((0, 0))
        return np.tril(self.columns[:, list(self.pivots)].T)

    def step(self, pivot_index):
        """Add the grid point ``pivot_index`` as the next pivot."""
        pivot_index = int(pivot_index)
        if not 0 <= pivot_index < self.grid.size:
            raise ValueError(f"grid index {pivot_index} out of range")
        if pivot_index in self.pivots:
            raise ValueError(f"grid index {pivot_index} is already a pivot")
        d = float(self.diag_residual[pivot_index])
        if not d > self.breakdown_tol:
            raise BreakdownError(
                f"pivot value {d:.3e} at step {self.n + 1} is below the breakdown tolerance {self.breakdown_tol:.3e}",
                step=self.n, state=self)
        z = self.grid.points[pivot_index]
        col = np.asarray(self.kernel.column(self.grid.points, z), dtype=float)
        if not np.all(np.isfinite(col)):
            bad = np.flatnonzero(~np.isfinite(col))[0]
            raise NumericalError(f"non-finite kernel value at grid point {self.grid.points[bad].tolist()}")
        n = self.n
        if n:
            prev = self._buffer.data[:n]
            col -= prev.T @ prev[:, pivot_index]
        col /= np.sqrt(d)
        diag = self.diag_residual - col * col
        low = float(np.min(diag))
        if low < -NEGATIVE_RTOL * self.k_max:
            raise NumericalError(f"residual diagonal reached {low:.3e} at step {n + 1}; precision lost")
        buffer = self._buffer if self._buffer.length == n else self._buffer.fork(n)
        buffer.append(col, n)
        return CholeskyState(self.kernel, self.grid, _diag=diag, _k_max=self.k_max, _buffer=buffer,
                             _pivots=self.pivots + (pivot_index,), _values=self.pivot_values + (d,))

    def residual_eval(self, x, y):
        """``R_n(x, y)`` at arbitrary points; broadcasts over a leading axis."""
        same = y is x
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        scalar = x.ndim <= 1 and y.ndim <= 1
        d = self.kernel.dim
        X = x.reshape(-1, d)
        Y = y.reshape(-1, d)
        X, Y = np.broadcast_arrays(X, Y)
        k = np.asarray(self.kernel.func(X, Y), dtype=float)
        if not np.all(np.isfinite(k)):
            raise NumericalError("non-finite kernel value in residual evaluation")
        if self.n:
            Z = self.pivot_points
            L = self.cross_matrix
            cx = solve_triangular(L, self.kernel.matrix(X, Z).T, lower=True)
            cy = cx if same else solve_triangular(L, self.kernel.matrix(Y, Z).T, lower=True)
            k = k - np.sum(cx * cy, axis=0)
        return float(k[0]) if scalar else k

    def max_diag(self):
        """``(index, value)`` of the largest residual diagonal entry, lowest index on ties."""
        idx = argmax_first(self.diag_residual, TIE_RTOL * self.k_max)
        return idx, float(self.diag_residual[idx])

    def residual_sup_norm(self):
        return max(0.0, float(np.max(self.diag_residual)))

    def clamped_diag(self):
        return np.maximum(self.diag_residual, 0.0)

    def __repr__(self):
        return f"CholeskyState(kernel={self.kernel.name}, grid={self.grid.size}, n={self.n})"


def init(kernel, grid):
    return CholeskyState(kernel, grid)


def step(state, pivot_index):
    return state.step(pivot_index)


def residual_eval(state, x, y):
    return state.residual_eval(x, y)


def max_diag(state):
    return state.max_diag()


def residual_sup_norm(state):
    return state.residual_sup_norm()


def factorize(kernel, grid, pivot_indices):
    """Run the factorization with a prescribed pivot order."""
    state = CholeskyState(kernel, grid)
    for idx in pivot_indices:
        state = state.step(idx)
    return state


def check_order_invariance(kernel, grid, pivots, order=None, rng=None):
    """Max grid deviation of the residual diagonal between two pivot orders.

    ``order`` permutes ``pivots``; a random permutation is drawn when omitted.
    """
    pivots = list(pivots)
    if order is None:
        order = np.random.default_rng(rng).permutation(len(pivots))
    first = factorize(kernel, grid, pivots)
    second = factorize(kernel, grid, [pivots[i] for i in order])
    return float(np.max(np.abs(first.diag_residual - second.diag_residual)))
