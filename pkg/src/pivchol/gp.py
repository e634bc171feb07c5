"""Noise-free GP posterior and the power function, via dense Gram solves.

Everything here factors ``K(S, S)`` directly with LAPACK and never touches
:mod:`pivchol.cholesky`, so the two routes can check one another.
"""

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .cholesky import BREAKDOWN_RTOL, TIE_RTOL, argmax_first
from .errors import BreakdownError, NumericalError


class GpPosterior:
    """Posterior of a zero-noise GP with prior ``(mean, kernel)`` given ``y = f(sites)``.

    ``jitter`` adds ``jitter**2`` to the Gram diagonal; leave it at zero
    when the exact identities matter.
    """

    def __init__(self, kernel, sites, values=None, mean=None, jitter=0.0):
        self.kernel = kernel
        self.sites = np.asarray(sites, dtype=float).reshape(-1, kernel.dim)
        n = len(self.sites)
        self.values = np.zeros(n) if values is None else np.asarray(values, dtype=float).reshape(n)
        self.mean = mean
        self.jitter = jitter
        if n:
            gram = kernel.matrix(self.sites) + jitter**2 * np.eye(n)
            try:
                self._chol = cho_factor(gram, lower=True)
            except LinAlgError:
                raise NumericalError("Gram matrix at the observation sites is singular") from None
            resid = self.values - self._prior(self.sites)
            self._weights = cho_solve(self._chol, resid)

    def _prior(self, X):
        if self.mean is None:
            return np.zeros(len(X))
        return np.asarray([self.mean(x) for x in X], dtype=float)

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        return x.ndim <= 1, x.reshape(-1, self.kernel.dim)

    def posterior_mean(self, x):
        scalar, X = self._points(x)
        out = self._prior(X)
        if len(self.sites):
            out = out + self.kernel.matrix(X, self.sites) @ self._weights
        return float(out[0]) if scalar else out

    def posterior_cov(self, x, y):
        """Posterior covariance at paired points (elementwise over a leading axis)."""
        sx, X = self._points(x)
        sy, Y = self._points(y)
        X, Y = np.broadcast_arrays(X, Y)
        out = np.asarray(self.kernel.func(X, Y), dtype=float)
        if len(self.sites):
            kx = self.kernel.matrix(X, self.sites)
            ky = self.kernel.matrix(Y, self.sites)
            out = out - np.sum(kx * cho_solve(self._chol, ky.T).T, axis=1)
        return float(out[0]) if sx and sy else out

    def posterior_var(self, x):
        return self.posterior_cov(x, x)

    def posterior_sd(self, x):
        return np.sqrt(np.maximum(self.posterior_var(x), 0.0))


def posterior_mean(gp, x):
    return gp.posterior_mean(x)


def posterior_cov(gp, x, y):
    return gp.posterior_cov(x, y)


def power_function(kernel, sites, x):
    """``sqrt(max(0, K(x, x) - k(x)^T K(S, S)^-1 k(x)))``."""
    gp = GpPosterior(kernel, sites)
    var = gp.posterior_var(x)
    return np.sqrt(np.maximum(var, 0.0))


def pgreedy_select(kernel, grid, n):
    """Grid indices chosen by P-greedy: repeatedly maximize the power function.

    Ties are broken toward the lowest index within the same tolerance the
    incremental factorization uses.
    """
    if n > grid.size:
        raise ValueError("more points requested than grid points")
    X = grid.points
    kdiag = np.asarray(kernel.diagonal(X), dtype=float)
    k_max = float(np.max(kdiag))
    chosen = []
    for _ in range(n):
        if chosen:
            S = X[chosen]
            try:
                chol = cho_factor(kernel.matrix(S), lower=True)
            except LinAlgError:
                raise BreakdownError("Gram matrix of selected points is singular", step=len(chosen)) from None
            kx = kernel.matrix(X, S)
            p2 = kdiag - np.sum(kx * cho_solve(chol, kx.T).T, axis=1)
        else:
            p2 = kdiag
        p2 = np.where(np.isin(np.arange(len(X)), chosen), 0.0, p2)
        idx = argmax_first(p2, TIE_RTOL * k_max)
        if not p2[idx] > BREAKDOWN_RTOL * k_max:
            raise BreakdownError(f"power function vanished at step {len(chosen) + 1}", step=len(chosen))
        chosen.append(idx)
    return chosen
