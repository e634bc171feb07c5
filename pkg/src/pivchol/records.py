"""Per-step convergence records and log-log rate fits."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ConvergenceRecord:
    """One factorization step.

    ``fill`` is the grid fill distance; the bounds add the grid spacing ``eta`` to it.
    ``bound_pack`` is ``8LR / (delta (n^(1/d) - 1))`` (``8LR`` at n = 1).
    ``excess_linear`` and ``excess_quadratic`` are the largest pointwise
    overshoots of the residual diagonal over ``4L dist(x, Z)`` and the
    quadratic analogue; both should be nonpositive.
    """

    n: int
    sup_residual: float
    fill: float
    min_sep: float
    bound_fill: float
    bound_pack: float
    bound_c11: float | None
    grid_size: int
    wall_time_ms: float
    eta: float = float("nan")
    pivot: tuple = ()
    pivot_value: float = float("nan")
    excess_linear: float = float("nan")
    excess_quadratic: float | None = None


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    fit_range: tuple = field(default=(0, 0))


def fit_rate(records, n_lo, n_hi, floor=1e-11):
    """Least-squares line through ``(log n, log sup_residual)`` for ``n_lo <= n <= n_hi``.

    Points with residual at or below ``floor`` are dropped.  ``records`` may be
    ConvergenceRecord objects or ``(n, residual)`` pairs.
    """
    pairs = [(r.n, r.sup_residual) if isinstance(r, ConvergenceRecord) else tuple(r) for r in records]
    pts = np.array([(n, v) for n, v in pairs if n_lo <= n <= n_hi and v > floor], dtype=float)
    if len(pts) < 5:
        raise ValueError(f"need at least 5 usable records in [{n_lo}, {n_hi}], got {len(pts)}")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ (slope, intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, (int(pts[0, 0]), int(pts[-1, 0])))
