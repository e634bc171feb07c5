"""
Posterior variance, power function, P-greedy
============================================

The residual kernel after n Cholesky steps is the posterior covariance of a
noise-free Gaussian process observed at the pivots, and its diagonal is the
squared power function.  So choosing the point of largest posterior variance
(P-greedy) picks exactly the complete-pivoting pivots.
"""

import numpy as np

from pivchol import Complete, GpPosterior, RunConfig, make_kernel, pgreedy_select, power_function, run, tensor_grid

kernel = make_kernel("matern", nu=1.5, ell=0.5)
grid = tensor_grid(kernel.domain, 501)
state, _ = run(RunConfig(kernel, 501, Complete(), n_max=12))

print("complete pivoting:", state.pivots)
print("P-greedy:         ", tuple(pgreedy_select(kernel, grid, 12)))

# the two routes to the same number
p = power_function(kernel, state.pivot_points, grid.points)
print("max |P^2 - R_n(x,x)| on the grid:", np.max(np.abs(p**2 - state.clamped_diag())))

# fit sin(pi x) at those sites
f = lambda X: np.sin(np.pi * X[:, 0])  # noqa: E731
gp = GpPosterior(kernel, state.pivot_points, f(state.pivot_points))
err = np.abs(gp.posterior_mean(grid.points) - f(grid.points))
print(f"max error {err.max():.2e}, max posterior sd {gp.posterior_sd(grid.points).max():.2e}")
