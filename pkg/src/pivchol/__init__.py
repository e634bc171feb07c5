"""Pivoted Cholesky for SPD kernels and matrices, with error-bound checks."""

from .cholesky import CholeskyState, check_order_invariance, factorize
from .errors import BreakdownError, ConfigError, NumericalError, ResourceLimitError
from .geometry import CandidateGrid, Domain, fill_distance, min_separation, packing_bound, tensor_grid
from .gp import GpPosterior, pgreedy_select, power_function
from .kernels import Kernel, build_catalog, estimate_diag_lipschitz, make_kernel
from .matrix import SpdMatrix, discrete_lipschitz, matrix_pivoted_cholesky, residual_max_entry
from .pivoting import (
    Complete, DeltaComplete, LocalMaxVol, RandomPivots, RunConfig, Uniform, parse_strategy,
    refine_grid_run, run, select_local_maxvol,
)
from .records import ConvergenceRecord, RateFit, fit_rate

__version__ = "0.1.0"
