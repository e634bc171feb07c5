"""Box domains, tensor candidate grids, fill and separation distances."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .errors import ResourceLimitError

DEFAULT_GRID_CAP = 2_000_000


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower, upper]`` in R^d."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if not np.all(lower < upper):
            raise ValueError("need lower < upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, lower, upper, dim):
        return cls(np.full(dim, float(lower)), np.full(dim, float(upper)))

    @property
    def dim(self):
        return self.lower.size

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def widths(self):
        return self.upper - self.lower

    @property
    def radius(self):
        """Radius of the smallest ball about the center containing the box."""
        return 0.5 * float(np.linalg.norm(self.upper - self.lower))

    @property
    def diameter(self):
        return 2.0 * self.radius

    def contains(self, points, atol=0.0):
        points = np.atleast_2d(points)
        return np.all((points >= self.lower - atol) & (points <= self.upper + atol), axis=-1)

    def sample(self, size, rng):
        rng = np.random.default_rng(rng)
        return self.lower + rng.random((size, self.dim)) * self.widths


@dataclass(frozen=True)
class CandidateGrid:
    """A finite net over a domain.

    ``spacing`` is the covering radius: every point of the domain lies
    within ``spacing`` of some grid point.
    """

    points: np.ndarray
    spacing: float
    domain: Domain | None = None
    shape: tuple = field(default=())

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.size

    def nearest_index(self, points):
        """Indices of the grid points nearest to ``points`` (lowest index on ties)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.shape and self.domain is not None:
            # tensor grid: round per axis, exact and tie-free apart from midpoints
            m = np.asarray(self.shape)
            t = (points - self.domain.lower) / self.domain.widths * (m - 1)
            idx = np.clip(np.rint(t).astype(np.int64), 0, m - 1)
            strides = np.concatenate(([1], np.cumprod(m[:-1])))
            return idx @ strides
        _, idx = cKDTree(self.points).query(points)
        return np.asarray(idx, dtype=np.int64)


def tensor_grid(domain, points_per_axis, cap=DEFAULT_GRID_CAP):
    """Endpoint-inclusive uniform grid with ``points_per_axis`` points per axis.

    Points are ordered with the first axis varying fastest.  The spacing is
    half the diagonal of one grid cell.
    """
    m = int(points_per_axis)
    if m < 2:
        raise ValueError("points_per_axis must be at least 2")
    d = domain.dim
    if float(m) ** d > cap:
        raise ResourceLimitError(f"grid of {m}^{d} points exceeds cap {cap}")
    axes = [np.linspace(lo, hi, m) for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.ravel(order="F") for g in mesh], axis=1)
    cell = domain.widths / (m - 1)
    spacing = 0.5 * float(np.linalg.norm(cell))
    return CandidateGrid(points, spacing, domain, (m,) * d)


def _as_points(pivots):
    pts = np.asarray(pivots, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


def fill_distance(pivots, grid):
    """Max over grid points of the distance to the nearest pivot.

    This under-estimates the continuous fill distance by at most
    ``grid.spacing``.
    """
    pts = _as_points(pivots)
    if pts.shape[0] == 0:
        raise ValueError("fill distance of an empty pivot set")
    dist, _ = cKDTree(pts).query(grid.points)
    return float(np.max(dist))


def min_separation(pivots):
    """Smallest pairwise distance among the pivots."""
    pts = _as_points(pivots)
    if pts.shape[0] < 2:
        raise ValueError("need at least two pivots")
    sep = float(np.min(pdist(pts)))
    if sep == 0.0:
        raise ValueError("pivot set contains duplicate points")
    return sep


def packing_bound(domain, n):
    """Upper bound ``2R / (n^(1/d) - 1)`` on the separation of ``n`` points in the domain's ball."""
    if n <= 1:
        raise ValueError("packing bound needs n > 1")
    return 2.0 * domain.radius / (n ** (1.0 / domain.dim) - 1.0)
