"""Pivot-selection strategies and the factorization driver loops."""

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial import cKDTree

from .cholesky import TIE_RTOL, CholeskyState, argmax_first, factorize
from .errors import BreakdownError, NumericalError, ResourceLimitError
from .geometry import DEFAULT_GRID_CAP, Domain, tensor_grid
from .records import ConvergenceRecord

MAXVOL_SWAP_RTOL = 1e-10


@dataclass(frozen=True)
class Complete:
    name = "complete"


@dataclass(frozen=True)
class DeltaComplete:
    delta: float
    seed: int = 0
    name = "delta"

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")


@dataclass(frozen=True)
class Uniform:
    """Predetermined cell-centred tensor pivots, ``points_per_axis`` per axis."""

    points_per_axis: int
    name = "uniform"

    def __post_init__(self):
        if self.points_per_axis < 1:
            raise ValueError("uniform pivoting needs at least one point per axis")


@dataclass(frozen=True)
class RandomPivots:
    seed: int = 0
    name = "random"


@dataclass(frozen=True)
class LocalMaxVol:
    max_sweeps: int = 20
    name = "maxvol"

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")


def parse_strategy(text, seed=None):
    """Parse ``complete``, ``delta:<d>``, ``uniform:<m>``, ``random:<seed>`` or ``maxvol:<sweeps>``."""
    head, _, arg = text.strip().partition(":")
    try:
        if head == "complete" and not arg:
            return Complete()
        if head == "delta":
            return DeltaComplete(float(arg), 0 if seed is None else seed)
        if head == "uniform":
            return Uniform(int(arg))
        if head == "random":
            return RandomPivots(int(arg) if arg else (0 if seed is None else seed))
        if head == "maxvol":
            return LocalMaxVol(int(arg) if arg else 20)
    except ValueError as exc:
        raise ValueError(f"bad strategy {text!r}: {exc}") from None
    raise ValueError(f"unknown strategy {text!r}")


def strategy_delta(strategy):
    return strategy.delta if isinstance(strategy, DeltaComplete) else 1.0


# -- single-step selection rules ---------------------------------------------

def _breakdown(state):
    return BreakdownError(f"no admissible pivot at step {state.n + 1}: residual diagonal is at the breakdown floor",
                          step=state.n, state=state)


def select_complete(state):
    idx, value = state.max_diag()
    if not value > state.breakdown_tol:
        raise _breakdown(state)
    return idx


def select_delta_complete(state, delta, rng):
    """Uniform random index among those with residual diagonal at least ``delta`` times the max."""
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    rng = np.random.default_rng(rng)
    _, top = state.max_diag()
    if not top > state.breakdown_tol:
        raise _breakdown(state)
    diag = state.diag_residual
    ok = np.flatnonzero((diag >= delta * top) & (diag > state.breakdown_tol))
    return int(ok[rng.integers(ok.size)])


def select_random(state, rng):
    rng = np.random.default_rng(rng)
    ok = np.flatnonzero(state.diag_residual > state.breakdown_tol)
    ok = np.setdiff1d(ok, state.pivots, assume_unique=True)
    if ok.size == 0:
        return None
    return int(ok[rng.integers(ok.size)])


def farthest_point_order(points):
    """Greedy farthest-point ordering starting from the first point."""
    n = len(points)
    order = [0]
    dist = np.linalg.norm(points - points[0], axis=1)
    for _ in range(n - 1):
        nxt = argmax_first(dist, 0.0)
        order.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    return order


def uniform_pivots(grid, points_per_axis, domain=None):
    """Grid indices of the cell-centred tensor pivots, ordered coarse to fine.

    Pivot ``k`` on an axis sits at ``lower + (k + 1/2) w / m``; each is snapped to
    the nearest grid point.  The farthest-point order makes every prefix spread
    over the domain instead of sweeping one side first.
    """
    domain = grid.domain if domain is None else domain
    m = int(points_per_axis)
    d = domain.dim
    axes = [lo + (np.arange(m) + 0.5) * (hi - lo) / m for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel(order="F") for g in mesh], axis=1).reshape(-1, d)
    idx = grid.nearest_index(centers)
    if len(np.unique(idx)) != len(idx):
        raise ValueError(f"grid of {grid.size} points is too coarse for {m} uniform pivots per axis")
    return [int(idx[i]) for i in farthest_point_order(centers)]


@dataclass
class MaxVolResult:
    pivots: list
    converged: bool
    sweeps: int
    swaps: int


def _loo_row(columns, cross, diag, k):
    """Residual diagonal with pivot ``k`` removed, from the factor of the full set."""
    e = np.zeros(cross.shape[0])
    e[k] = 1.0
    u = solve_triangular(cross, e, lower=True)
    b = u @ columns
    return diag + b * b / (u @ u)


def leave_one_out_diag(state):
    """Residual diagonals with each pivot removed in turn, shape ``(n, grid.size)``.

    Uses ``R_{S-k}(x, x) = R_S(x, x) + b_k(x)^2 / (G^-1)_kk`` with
    ``b = G^-1 K(S, x)``, all from the factor already held by ``state``.
    """
    L = state.cross_matrix
    B = solve_triangular(L.T, state.columns, lower=False)
    Linv = solve_triangular(L, np.eye(state.n), lower=True)
    ginv_diag = np.sum(Linv * Linv, axis=0)
    return state.diag_residual[None, :] + B * B / ginv_diag[:, None]


class _SwapFactor:
    """Mutable pivoted Cholesky factor supporting pivot removal.

    Removing pivot ``k`` re-triangularizes the cross matrix with Givens
    rotations on the factor columns and drops the last column, so a swap
    costs ``O(n N)`` instead of a full refactorization.  Kernel columns are
    cached by grid index.
    """

    def __init__(self, state):
        self.kernel, self.grid = state.kernel, state.grid
        self.k_diag = np.asarray(self.kernel.diagonal(self.grid.points), dtype=float)
        self._rows = np.array(state.columns)
        self.pivots = list(state.pivots)
        self.diag = np.array(state.diag_residual)
        self._cache = {}

    @property
    def columns(self):
        return self._rows[: len(self.pivots)]

    @property
    def cross(self):
        return np.tril(self.columns[:, self.pivots].T)

    def _kernel_column(self, idx):
        col = self._cache.get(idx)
        if col is None:
            col = np.asarray(self.kernel.column(self.grid.points, self.grid.points[idx]), dtype=float)
            self._cache[idx] = col
        return col

    def remove(self, k):
        C = self._rows
        n = len(self.pivots)
        for j in range(k, n - 1):
            # cross-matrix row of the pivot that moves up to position j
            z = self.pivots[j + 1]
            a, b = C[j, z], C[j + 1, z]
            r = np.hypot(a, b)
            if r == 0.0:
                continue
            cs, sn = a / r, b / r
            cj = cs * C[j] + sn * C[j + 1]
            C[j + 1] *= cs
            C[j + 1] -= sn * C[j]
            C[j] = cj
        self.diag += C[n - 1] ** 2
        del self.pivots[k]

    def add(self, idx):
        col = self._kernel_column(idx) - self.columns.T @ self.columns[:, idx]
        col /= np.sqrt(self.diag[idx])
        self.diag -= col * col
        # removal always precedes addition, so the freed row is available
        self._rows[len(self.pivots)] = col
        self.pivots.append(idx)

    def refresh_diag(self):
        self.diag = self.k_diag - np.sum(self.columns**2, axis=0)


def select_local_maxvol(state, n, max_sweeps=20, tol=0.0):
    """Locally maximum-volume pivot set of size ``n`` on the state's grid.

    Starts from ``n`` complete-pivoting steps (fewer if the residual drops
    below ``tol`` first), then sweeps over the pivots, swapping a pivot for
    the grid point that maximizes the leave-one-out residual diagonal
    whenever that increases the Gram determinant.  A swapped-in point joins
    the end of the pivot list.
    """
    kernel, grid = state.kernel, state.grid
    if n > grid.size:
        raise ValueError("more pivots requested than grid points")
    current = CholeskyState(kernel, grid)
    while current.n < n and current.residual_sup_norm() >= tol:
        current = current.step(select_complete(current))
    factor = _SwapFactor(current)
    atol = TIE_RTOL * current.k_max
    swaps = 0
    for sweep in range(1, max_sweeps + 1):
        swapped = False
        factor.refresh_diag()
        for z in list(factor.pivots):
            k = factor.pivots.index(z)
            row = _loo_row(factor.columns, factor.cross, factor.diag, k)
            y = argmax_first(row, atol)
            if row[y] > row[z] * (1.0 + MAXVOL_SWAP_RTOL) and y not in factor.pivots:
                if not row[y] > current.breakdown_tol:
                    raise BreakdownError(f"swap pivot value {row[y]:.3e} is below the breakdown tolerance",
                                         step=len(factor.pivots))
                factor.remove(k)
                factor.add(y)
                swapped = True
                swaps += 1
        if not swapped:
            return MaxVolResult(list(factor.pivots), True, sweep, swaps)
    return MaxVolResult(list(factor.pivots), False, max_sweeps, swaps)


# -- driver -------------------------------------------------------------------

@dataclass
class RunConfig:
    kernel: object
    grid_points: int
    strategy: object = field(default_factory=Complete)
    n_max: int = 100
    tol: float = 1e-10
    domain: Domain | None = None
    grid_cap: int = DEFAULT_GRID_CAP

    def __post_init__(self):
        if self.domain is None:
            self.domain = self.kernel.domain
        if self.domain.dim != self.kernel.dim:
            raise ValueError("domain and kernel dimensions differ")
        if self.n_max < 1:
            raise ValueError("n_max must be positive")
        if self.n_max > self.grid_points ** self.domain.dim:
            raise ValueError("n_max exceeds the grid size")


class _Tracker:
    """Distances from every grid point to the nearest pivot, and pivot separation."""

    def __init__(self, grid, pivot_points=()):
        self.grid = grid
        self.points = [np.asarray(p) for p in pivot_points]
        if self.points:
            pts = np.array(self.points)
            self.dist, _ = cKDTree(pts).query(grid.points)
            self.min_sep = float(np.min(cKDTree(pts).query(pts, k=2)[0][:, 1])) if len(pts) > 1 else np.inf
        else:
            self.dist = np.full(grid.size, np.inf)
            self.min_sep = np.inf

    def add(self, z):
        if self.points:
            prev = np.array(self.points)
            self.min_sep = min(self.min_sep, float(np.min(np.linalg.norm(prev - z, axis=1))))
        self.points.append(np.asarray(z))
        self.dist = np.minimum(self.dist, np.linalg.norm(self.grid.points - z, axis=1))

    @property
    def fill(self):
        return float(np.max(self.dist))


def make_record(state, tracker, domain, delta=1.0, wall_ms=0.0):
    kernel = state.kernel
    n = state.n
    d = domain.dim
    eta = state.grid.spacing
    sup = state.residual_sup_norm()
    fill = tracker.fill
    L = kernel.diag_lipschitz
    nan = float("nan")
    if L is not None:
        bound_fill = 4.0 * L * (fill + eta)
        if n == 1:
            bound_pack = 8.0 * L * domain.radius
        else:
            bound_pack = 8.0 * L * domain.radius / (delta * (n ** (1.0 / d) - 1.0))
        excess = float(np.max(state.diag_residual - 4.0 * L * tracker.dist))
    else:
        bound_fill = bound_pack = excess = nan
    bound_c11 = excess_q = None
    if kernel.c11_constants is not None:
        q = kernel.c11_constants.quadratic_factor(d)
        bound_c11 = q * (fill + eta) ** 2
        excess_q = float(np.max(state.diag_residual - q * tracker.dist**2))
    z = state.grid.points[state.pivots[-1]]
    return ConvergenceRecord(
        n=n, sup_residual=sup, fill=fill,
        min_sep=tracker.min_sep if n > 1 else nan,
        bound_fill=bound_fill, bound_pack=bound_pack, bound_c11=bound_c11,
        grid_size=state.grid.size, wall_time_ms=wall_ms, eta=eta,
        pivot=tuple(float(v) for v in z), pivot_value=state.pivot_values[-1],
        excess_linear=excess, excess_quadratic=excess_q)


def _pivot_plan(config, state):
    """Pivot order for the predetermined strategies, or None for adaptive ones."""
    strategy = config.strategy
    if isinstance(strategy, Uniform):
        return uniform_pivots(state.grid, strategy.points_per_axis, config.domain)
    if isinstance(strategy, LocalMaxVol):
        return select_local_maxvol(state, config.n_max, strategy.max_sweeps, config.tol).pivots
    return None


def _factor_loop(config, state, choose, records, delta=1.0):
    tracker = _Tracker(state.grid, state.pivot_points)
    while state.n < config.n_max:
        if state.residual_sup_norm() < config.tol:
            break
        t0 = time.perf_counter()
        try:
            idx = choose(state)
            if idx is None:
                break
            state = state.step(idx)
        except BreakdownError as exc:
            exc.records = records
            exc.state = state
            raise
        except NumericalError as exc:
            exc.records = records
            raise
        tracker.add(state.grid.points[idx])
        wall = 1e3 * (time.perf_counter() - t0)
        records.append(make_record(state, tracker, config.domain, delta, wall))
    return state


def run(config):
    """Factorize with ``config.strategy``; returns ``(state, records)``.

    Stops after ``n_max`` steps or once the grid residual drops below ``tol``.
    A breakdown is re-raised with the records gathered so far.
    """
    strategy = config.strategy
    grid = tensor_grid(config.domain, config.grid_points, config.grid_cap)
    state = CholeskyState(config.kernel, grid)
    records = []
    if isinstance(strategy, Complete):
        choose = select_complete
    elif isinstance(strategy, DeltaComplete):
        rng = np.random.default_rng(strategy.seed)
        choose = lambda s: select_delta_complete(s, strategy.delta, rng)  # noqa: E731
    elif isinstance(strategy, RandomPivots):
        rng = np.random.default_rng(strategy.seed)
        choose = lambda s: select_random(s, rng)  # noqa: E731
    else:
        try:
            plan = _pivot_plan(config, state)
        except BreakdownError as exc:
            exc.records = records
            raise
        choose = lambda s: plan[s.n] if s.n < len(plan) else None  # noqa: E731
    state = _factor_loop(config, state, choose, records, strategy_delta(strategy))
    return state, records


def refine_grid_run(config, delta_target):
    """Complete pivoting that refines the grid to keep each grid pick ``delta_target``-complete.

    Before each step the grid maximizer ``M`` of the residual diagonal must
    satisfy ``4 L eta <= (1 - delta_target) M``; otherwise the grid goes from
    ``m`` to ``2m - 1`` points per axis (so existing pivots stay on the grid)
    and the factorization is rebuilt with the same pivots.
    """
    if not 0 < delta_target < 1:
        raise ValueError("delta_target must lie in (0, 1)")
    L = config.kernel.diag_lipschitz
    if L is None:
        raise ValueError("grid refinement needs a diagonal Lipschitz constant")
    m = config.grid_points
    state = CholeskyState(config.kernel, tensor_grid(config.domain, m, config.grid_cap))
    records = []
    tracker = _Tracker(state.grid)
    while state.n < config.n_max:
        if state.residual_sup_norm() < config.tol:
            break
        t0 = time.perf_counter()
        while 4.0 * L * state.grid.spacing > (1.0 - delta_target) * state.max_diag()[1]:
            m = 2 * m - 1
            try:
                grid = tensor_grid(config.domain, m, config.grid_cap)
            except ResourceLimitError as exc:
                exc.records = records
                raise
            pts = state.pivot_points
            state = factorize(config.kernel, grid, grid.nearest_index(pts) if len(pts) else [])
            tracker = _Tracker(grid, pts)
        try:
            idx = select_complete(state)
            state = state.step(idx)
        except BreakdownError as exc:
            exc.records = records
            raise
        tracker.add(state.grid.points[idx])
        wall = 1e3 * (time.perf_counter() - t0)
        records.append(make_record(state, tracker, config.domain, delta_target, wall))
    return state, records


def with_strategy(config, strategy):
    return replace(config, strategy=strategy)
