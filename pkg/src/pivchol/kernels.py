"""SPD kernels with analytic diagonal-Lipschitz metadata.

Every kernel is a pure function of two point arrays.  ``func(X, Y)`` takes
arrays whose last axis has length ``dim`` and broadcasts over the leading
axes, so the same callable serves scalar evaluation, kernel columns and
full Gram matrices.

The 2-d and 3-d Laplace Green's functions are deliberately absent: they are
singular on the diagonal, so no finite diagonal Lipschitz constant exists.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, special

from .geometry import Domain

KERNEL_NAMES = ("matern", "brownian", "ou", "gaussian", "green1d", "rational-a", "rational-b")
MATERN_NUS = (0.5, 1.0, 1.5)


@dataclass(frozen=True)
class C11Constants:
    """Constants of a kernel with Lipschitz first derivatives.

    ``lipschitz`` bounds the change of first partials away from the diagonal,
    ``first_arg`` is the Lipschitz constant in the first argument and
    ``diag_min`` is the minimum of ``K(x, x)`` over the domain.
    """

    lipschitz: float
    first_arg: float
    diag_min: float

    def quadratic_factor(self, dim):
        return np.sqrt(dim) * (2.0 * self.lipschitz + self.first_arg**2 / self.diag_min)


@dataclass(frozen=True)
class Kernel:
    name: str
    dim: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    domain: Domain
    diag_lipschitz: float | None = None
    c11_constants: C11Constants | None = None
    certified: bool = True
    params: dict = field(default_factory=dict)

    def _check(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 0:
            pts = pts.reshape(1)
        if pts.shape[-1] != self.dim:
            raise ValueError(f"{self.name}: expected points of dimension {self.dim}, got shape {pts.shape}")
        return pts

    def __call__(self, x, y):
        """``K(x, y)`` broadcast over leading axes."""
        x = self._check(x)
        y = self._check(y)
        out = self.func(x, y)
        return float(out) if np.ndim(out) == 0 else out

    def matrix(self, X, Y=None):
        X = np.atleast_2d(self._check(X))
        Y = X if Y is None else np.atleast_2d(self._check(Y))
        return self.func(X[:, None, :], Y[None, :, :])

    def column(self, X, z):
        X = np.atleast_2d(self._check(X))
        z = self._check(z).reshape(1, self.dim)
        return self.func(X, z)

    def diagonal(self, X):
        X = np.atleast_2d(self._check(X))
        return self.func(X, X)

    @property
    def has_certified_lipschitz(self):
        return self.diag_lipschitz is not None and self.certified


def kernel_eval(kernel, x, y):
    return kernel(x, y)


def _dist(X, Y):
    return np.sqrt(np.sum((X - Y) ** 2, axis=-1))


def _positive(**kw):
    for key, val in kw.items():
        if not val > 0:
            raise ValueError(f"{key} must be positive, got {val}")


def ou(alpha=1.0, ell=1.0, dim=1, lower=-1.0, upper=1.0):
    """Exponential kernel ``alpha * exp(-|x - y| / ell)``; diagonal Lipschitz ``alpha / ell``."""
    _positive(alpha=alpha, ell=ell)

    def func(X, Y):
        return alpha * np.exp(-_dist(X, Y) / ell)

    return Kernel("ou", dim, func, Domain.cube(lower, upper, dim), alpha / ell,
                  params={"alpha": alpha, "ell": ell})


def _matern_one_diag_lipschitz(ell):
    # 1 - s K_1(s) has derivative s K_0(s) in s = sqrt(2) r / ell
    res = optimize.minimize_scalar(lambda s: -s * special.k0(s), bounds=(1e-8, 10.0),
                                   method="bounded", options={"xatol": 1e-12})
    peak = -res.fun * (1.0 + 1e-9)
    return np.sqrt(2.0) / ell * peak


def matern(nu=0.5, ell=1.0, dim=1, lower=-1.0, upper=1.0):
    """Matérn kernel for ``nu`` in {1/2, 1, 3/2}."""
    _positive(nu=nu, ell=ell)
    nu = float(nu)
    if nu == 0.5:
        def func(X, Y):
            return np.exp(-_dist(X, Y) / ell)
        lip, c11 = 1.0 / ell, None
    elif nu == 1.0:
        def func(X, Y):
            s = np.sqrt(2.0) * _dist(X, Y) / ell
            safe = np.where(s > 0, s, 1.0)
            return np.where(s > 0, safe * special.k1(safe), 1.0)
        lip, c11 = _matern_one_diag_lipschitz(ell), None
    elif nu == 1.5:
        a = np.sqrt(3.0) / ell

        def func(X, Y):
            ar = a * _dist(X, Y)
            return (1.0 + ar) * np.exp(-ar)
        lip = a / np.e
        c11 = C11Constants(a * a, a / np.e, 1.0)
    else:
        raise ValueError(f"matern supports nu in {MATERN_NUS}, got {nu}")
    return Kernel("matern", dim, func, Domain.cube(lower, upper, dim), lip, c11,
                  params={"nu": nu, "ell": ell})


def gaussian(sigma=1.0, dim=1, lower=-1.0, upper=1.0):
    """``exp(-|x - y|^2 / (2 sigma^2))``."""
    _positive(sigma=sigma)

    def func(X, Y):
        return np.exp(-np.sum((X - Y) ** 2, axis=-1) / (2.0 * sigma * sigma))

    lip = np.exp(-0.5) / sigma
    c11 = C11Constants(1.0 / sigma**2, np.exp(-0.5) / sigma, 1.0)
    return Kernel("gaussian", dim, func, Domain.cube(lower, upper, dim), lip, c11,
                  params={"sigma": sigma})


def brownian(shift=1.0, dim=1, upper=1.0):
    """Product Brownian kernel ``prod_i min(x_i + shift, y_i + shift)`` on ``[-shift, upper]^d``.

    With the factors bounded by ``upper + shift`` a telescoping sum gives the
    diagonal Lipschitz constant ``(upper + shift)^(d-1) * sqrt(d)``.
    """
    if shift < 0:
        raise ValueError("shift must be nonnegative")
    top = upper + shift
    _positive(width=top)

    def func(X, Y):
        return np.prod(np.minimum(X + shift, Y + shift), axis=-1)

    lip = top ** (dim - 1) * np.sqrt(dim)
    return Kernel("brownian", dim, func, Domain.cube(-shift, upper, dim), lip,
                  params={"shift": shift, "upper": upper})


def green1d():
    """Dirichlet Green's function of ``-u''`` on [0, 1]: ``min(x, y) - x y``."""

    def func(X, Y):
        x, y = X[..., 0], Y[..., 0]
        return np.minimum(x, y) - x * y

    return Kernel("green1d", 1, func, Domain.cube(0.0, 1.0, 1), 1.0)


def rational_a():
    """``1 / (1 + 100 (x^2 - y^2)^2)`` on [-1, 1].

    ``t / (1 + t) <= sqrt(t) / 2`` with ``sqrt(t) = 10 |x - y| |x + y|`` gives L = 10.
    """

    def func(X, Y):
        x, y = X[..., 0], Y[..., 0]
        return 1.0 / (1.0 + 100.0 * (x * x - y * y) ** 2)

    return Kernel("rational-a", 1, func, Domain.cube(-1.0, 1.0, 1), 10.0)


def rational_b():
    """``1 / (1 + x^2 + y^2)`` on [-1, 1]; L = 1/sqrt(2)."""

    def func(X, Y):
        x, y = X[..., 0], Y[..., 0]
        return 1.0 / (1.0 + x * x + y * y)

    return Kernel("rational-b", 1, func, Domain.cube(-1.0, 1.0, 1), 1.0 / np.sqrt(2.0))


_FACTORIES = {
    "matern": matern,
    "ou": ou,
    "gaussian": gaussian,
    "brownian": brownian,
    "green1d": green1d,
    "rational-a": rational_a,
    "rational-b": rational_b,
}
_ONE_D_ONLY = {"green1d", "rational-a", "rational-b"}


def make_kernel(name, dim=1, **params):
    """Build a catalog kernel by name."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {', '.join(KERNEL_NAMES)}") from None
    if name in _ONE_D_ONLY:
        if dim != 1:
            raise ValueError(f"{name} is only defined for dim=1")
        if params:
            raise ValueError(f"{name} takes no parameters")
        return factory()
    return factory(dim=dim, **params)


def supports_dim(name, dim):
    return dim == 1 or name not in _ONE_D_ONLY


def build_catalog(dim=1):
    """Default instances of every catalog kernel available in ``dim`` dimensions."""
    kernels = [
        ou(alpha=2.0, ell=1.0, dim=dim),
        *(matern(nu=nu, ell=0.5, dim=dim) for nu in MATERN_NUS),
        brownian(shift=1.0, dim=dim),
        gaussian(sigma=1.0, dim=dim),
    ]
    if dim == 1:
        kernels += [green1d(), rational_a(), rational_b()]
    return kernels


def estimate_diag_lipschitz(kernel, domain=None, n_pairs=100_000, rng=None):
    """Sampled lower estimate of the diagonal Lipschitz constant.

    Pairs are drawn both globally and at geometrically shrinking offsets, so
    suprema approached as ``y -> x`` are seen.  The result is not a
    certificate: sampling can only under-estimate.
    """
    domain = kernel.domain if domain is None else domain
    rng = np.random.default_rng(rng)
    half = n_pairs // 2
    x = domain.sample(n_pairs, rng)
    y = np.empty_like(x)
    y[:half] = domain.sample(half, rng)
    scales = domain.diameter * np.logspace(-6, 0, n_pairs - half)
    step = rng.standard_normal((n_pairs - half, domain.dim))
    step *= (scales / np.linalg.norm(step, axis=1))[:, None]
    y[half:] = np.clip(x[half:] + step, domain.lower, domain.upper)
    r = _dist(x, y)
    keep = r > 0
    quot = np.abs(kernel.func(x, x) - kernel.func(x, y))[keep] / r[keep]
    return float(np.max(quot))
