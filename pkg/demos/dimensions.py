"""
The curse of dimension for a rough kernel
=========================================

Same Matérn nu = 1/2 kernel on [-1, 1]^d for d = 1, 2, 3.  The packing bound
8LR / (n^(1/d) - 1) predicts a rate of n^(-1/d), and the fitted slopes land
close to -1, -1/2 and -1/3.
"""

from pivchol import Complete, RunConfig, fit_rate, make_kernel, run
from pivchol.experiments import DEFAULT_GRID

for d, n_max in ((1, 200), (2, 400), (3, 400)):
    kernel = make_kernel("matern", nu=0.5, ell=0.5, dim=d)
    _, records = run(RunConfig(kernel, DEFAULT_GRID[d], Complete(), n_max=n_max))
    fit = fit_rate(records, 20, n_max)
    worst = max(r.sup_residual / r.bound_pack for r in records[1:])
    print(f"d={d}: slope {fit.slope:+.3f} (theory {-1 / d:+.3f}), "
          f"residual uses at most {100 * worst:.1f}% of the packing bound")
