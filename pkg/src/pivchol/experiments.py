"""Experiment configuration, CSV traces and bound checking.

Configs are flat ``key = value`` text files; ``#`` starts a comment.  Keys:

    kernel      catalog name (matern, brownian, ou, gaussian, green1d, rational-a, rational-b)
    nu, ell, alpha, sigma, shift
                kernel parameters (only those the kernel takes)
    dim         spatial dimension (default 1)
    lower, upper
                box bounds, a scalar or a comma list (default: the kernel's own domain)
    grid        grid points per axis (default 2001, 201, 41 for d = 1, 2, 3)
    strategy    complete | delta:<d> | uniform:<m> | random:<seed> | maxvol:<sweeps>
    n_max       number of steps (default 100)
    seed        seed for randomized strategies (default 0)
    tol         stop once the grid residual falls below this (default 1e-10)
    refine_delta
                run complete pivoting with grid refinement at this target delta
    fit_lo, fit_hi
                step range for the log-log rate fit (default 10 .. n_max)
    function    gp-demo target: sin, runge, abs
"""

import csv
import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels as _kernels
from .errors import BreakdownError, ConfigError, NumericalError
from .geometry import Domain, packing_bound, tensor_grid
from .gp import GpPosterior
from .matrix import (
    SpdMatrix, discrete_lipschitz, matrix_bound, matrix_pivoted_cholesky, residual_max_entry,
)
from .pivoting import (
    Complete, DeltaComplete, LocalMaxVol, RunConfig, Uniform, parse_strategy, refine_grid_run, run,
    select_complete,
)
from .records import ConvergenceRecord, RateFit, fit_rate
from .cholesky import BREAKDOWN_RTOL, CholeskyState

__all__ = ["ConvergenceRecord", "RateFit", "fit_rate", "ExperimentConfig", "read_config",
           "parse_config", "run_experiment", "check_bounds", "BoundReport", "write_records_csv",
           "cmd_convergence", "cmd_bounds", "cmd_matrix", "cmd_gp_demo", "cmd_catalog"]

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION, EXIT_BREAKDOWN = 0, 1, 2, 3
DEFAULT_GRID = {1: 2001, 2: 201, 3: 41}
BOUND_SLACK = 1e-10
EXCESS_CHECKS = {"pointwise", "c11_pointwise"}
# fill <= 2R/(n^(1/d)-1) is not implied by the separation argument and fails
# where the kernel diagonal vanishes (the shifted Brownian kernel at x = -1)
INFORMATIONAL_CHECKS = {"fill_decay"}
KERNEL_PARAMS = {
    "matern": ("nu", "ell"),
    "ou": ("alpha", "ell"),
    "gaussian": ("sigma",),
    "brownian": ("shift",),
}
TEST_FUNCTIONS = {
    "sin": lambda X: np.sin(np.pi * np.sum(X, axis=1)),
    "runge": lambda X: 1.0 / (1.0 + 25.0 * np.sum(X * X, axis=1)),
    "abs": lambda X: np.sum(np.abs(X), axis=1),
}


def _floats(text, dim):
    vals = [float(v) for v in str(text).split(",")]
    if len(vals) == 1:
        vals = vals * dim
    if len(vals) != dim:
        raise ConfigError(f"expected 1 or {dim} bounds, got {text!r}")
    return vals


@dataclass
class ExperimentConfig:
    kernel: str = "matern"
    params: dict = field(default_factory=dict)
    dim: int = 1
    lower: list | None = None
    upper: list | None = None
    grid: int | None = None
    strategy: str = "complete"
    n_max: int = 100
    seed: int = 0
    tol: float = 1e-10
    refine_delta: float | None = None
    fit_lo: int = 10
    fit_hi: int | None = None
    function: str = "sin"

    def build_kernel(self):
        name = self.kernel
        if name not in _kernels.KERNEL_NAMES:
            raise ConfigError(f"unknown kernel {name!r}")
        if not _kernels.supports_dim(name, self.dim):
            raise ConfigError(f"kernel {name} is one-dimensional")
        allowed = KERNEL_PARAMS.get(name, ())
        extra = set(self.params) - set(allowed)
        if extra:
            raise ConfigError(f"kernel {name} does not take {sorted(extra)}")
        kw = dict(self.params)
        if self.upper is not None and name in ("matern", "ou", "gaussian"):
            kw.update(lower=float(np.min(self.lower)) if self.lower else -1.0,
                      upper=float(np.max(self.upper)))
        if self.upper is not None and name == "brownian":
            kw["upper"] = float(np.max(self.upper))
        try:
            return _kernels.make_kernel(name, dim=self.dim, **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def build_domain(self, kernel):
        lower = kernel.domain.lower if self.lower is None else np.asarray(self.lower, float)
        upper = kernel.domain.upper if self.upper is None else np.asarray(self.upper, float)
        try:
            domain = Domain(lower, upper)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if np.any(domain.lower < kernel.domain.lower - 1e-15) or np.any(domain.upper > kernel.domain.upper + 1e-15):
            raise ConfigError(f"domain exceeds where kernel {kernel.name} is defined")
        return domain

    def run_config(self):
        kernel = self.build_kernel()
        domain = self.build_domain(kernel)
        grid = self.grid or DEFAULT_GRID.get(self.dim, 21)
        try:
            strategy = parse_strategy(self.strategy, self.seed)
            return RunConfig(kernel, grid, strategy, self.n_max, self.tol, domain)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def read_config(path):
    """Read a ``key = value`` file into a dict of strings."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            out[key.strip()] = value.strip()
    return out


def parse_config(entries):
    """Build an :class:`ExperimentConfig` from string key/value pairs."""
    entries = dict(entries)
    cfg = ExperimentConfig()
    try:
        cfg.kernel = entries.pop("kernel", cfg.kernel)
        cfg.dim = int(entries.pop("dim", cfg.dim))
        for key in ("nu", "ell", "alpha", "sigma", "shift"):
            if key in entries:
                cfg.params[key] = float(entries.pop(key))
        if "lower" in entries:
            cfg.lower = _floats(entries.pop("lower"), cfg.dim)
        if "upper" in entries:
            cfg.upper = _floats(entries.pop("upper"), cfg.dim)
        for key, conv in (("grid", int), ("n_max", int), ("seed", int), ("tol", float),
                          ("refine_delta", float), ("fit_lo", int), ("fit_hi", int)):
            if key in entries:
                setattr(cfg, key, conv(entries.pop(key)))
        cfg.strategy = entries.pop("strategy", cfg.strategy)
        cfg.function = entries.pop("function", cfg.function)
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    if entries:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(entries))}")
    if cfg.dim < 1:
        raise ConfigError("dim must be positive")
    return cfg


def run_experiment(cfg):
    """Run the factorization a config describes; returns ``(run_config, state, records)``."""
    rc = cfg.run_config()
    if cfg.refine_delta is not None:
        if not isinstance(rc.strategy, Complete):
            raise ConfigError("grid refinement runs complete pivoting only")
        try:
            state, records = refine_grid_run(rc, cfg.refine_delta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        state, records = run(rc)
    return rc, state, records


# -- bound checks -------------------------------------------------------------

@dataclass
class BoundCheck:
    """Tally of one bound along a trace.

    For ``excess`` checks the recorded value is already ``value - bound`` and
    ``worst`` is the largest excess; otherwise ``worst`` is the largest ratio.
    ``informational`` checks are reported but never count as violations.
    """

    name: str
    excess: bool = False
    informational: bool = False
    checked: int = 0
    violations: int = 0
    worst: float = -math.inf
    first_violation: int | None = None

    def add(self, n, value, bound=0.0):
        self.checked += 1
        if self.excess:
            over = value
            self.worst = max(self.worst, value)
        else:
            over = value - bound
            ratio = value / bound if bound > 0 else (0.0 if value <= 0 else math.inf)
            self.worst = max(self.worst, ratio)
        if over > BOUND_SLACK:
            self.violations += 1
            if self.first_violation is None:
                self.first_violation = n

    @property
    def ok(self):
        return self.informational or self.violations == 0


@dataclass
class BoundReport:
    checks: dict

    @property
    def violations(self):
        return sum(c.violations for c in self.checks.values() if not c.informational)

    @property
    def ok(self):
        return self.violations == 0

    def lines(self):
        for c in self.checks.values():
            label = "worst_excess" if c.excess else "worst_ratio"
            worst = f"{c.worst:.3e}" if c.excess else f"{c.worst:.4f}"
            if c.violations == 0:
                status = "ok"
            else:
                status = f"{'exceeded' if c.informational else 'VIOLATED'} x{c.violations} (first at n={c.first_violation})"
            note = " [informational]" if c.informational else ""
            yield f"{c.name:<16} checked={c.checked:<5} {label}={worst}  {status}{note}"


def check_bounds(rc, records, delta=None):
    """Check every applicable bound on a trace produced from ``rc``.

    ``delta`` overrides the strategy's pivot quality (used for refined runs).
    """
    kernel, domain, strategy = rc.kernel, rc.domain, rc.strategy
    L = kernel.diag_lipschitz
    if L is None:
        raise ConfigError(f"kernel {kernel.name} has no diagonal Lipschitz constant")
    d = domain.dim
    greedy = isinstance(strategy, (Complete, DeltaComplete))
    if delta is None:
        delta = strategy.delta if isinstance(strategy, DeltaComplete) else 1.0
    names = ["fill", "pointwise", "separation_geom"]
    if greedy:
        names += ["separation", "packing"]
    if isinstance(strategy, Complete) and delta == 1.0:
        names += ["fill_decay"]
    if isinstance(strategy, LocalMaxVol):
        names += ["maxvol_final"]
    if isinstance(strategy, Uniform):
        names += ["uniform_tensor"]
    if kernel.c11_constants is not None:
        names += ["c11_fill", "c11_pointwise"]
    checks = {name: BoundCheck(name, excess=name in EXCESS_CHECKS, informational=name in INFORMATIONAL_CHECKS)
              for name in names}
    for rec in records:
        n = rec.n
        checks["fill"].add(n, rec.sup_residual, rec.bound_fill)
        checks["pointwise"].add(n, rec.excess_linear)
        if n > 1:
            checks["separation_geom"].add(n, rec.min_sep, packing_bound(domain, n))
        if greedy:
            if n > 1:
                checks["separation"].add(n, rec.sup_residual, 4 * L * rec.min_sep / delta)
            checks["packing"].add(n, rec.sup_residual, rec.bound_pack)
        if "fill_decay" in checks and n > 1:
            checks["fill_decay"].add(n, rec.fill, packing_bound(domain, n) + rec.eta)
        if rec.bound_c11 is not None:
            checks["c11_fill"].add(n, rec.sup_residual, rec.bound_c11)
            checks["c11_pointwise"].add(n, rec.excess_quadratic)
    if records and isinstance(strategy, LocalMaxVol):
        last = records[-1]
        bound = 4 * L * last.min_sep if last.n > 1 else last.bound_pack
        checks["maxvol_final"].add(last.n, last.sup_residual, bound)
    if records and isinstance(strategy, Uniform):
        m = strategy.points_per_axis
        last = records[-1]
        if last.n == m**d:
            h = float(np.linalg.norm(domain.widths)) / (2 * m) + last.eta
            checks["uniform_tensor"].add(last.n, last.sup_residual, 4 * L * h)
    return BoundReport(checks)


# -- CSV ----------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def record_columns(dim, timing=False):
    cols = [f.name for f in fields(ConvergenceRecord) if f.name != "pivot"]
    if not timing:
        cols.remove("wall_time_ms")
    return cols + [f"pivot_x{i}" for i in range(dim)]


def write_records_csv(path_or_file, records, dim, timing=False, warning=None):
    """One row per record, 17 significant digits; wall time only when ``timing``."""
    cols = record_columns(dim, timing)
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in records:
            row = {f.name: getattr(rec, f.name) for f in fields(rec)}
            for i, v in enumerate(rec.pivot):
                row[f"pivot_x{i}"] = v
            w.writerow([_fmt(row.get(c)) for c in cols])
        if warning:
            fh.write(f"# warning: {warning}\n")
    finally:
        if own:
            fh.close()


def read_records_csv(path):
    """Parse a trace written by :func:`write_records_csv` back into records."""
    out = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    names = {f.name for f in fields(ConvergenceRecord)}
    for row in body:
        vals = dict(zip(header, row))
        kw = {}
        for key, text in vals.items():
            if key in names:
                if text == "":
                    kw[key] = None
                else:
                    kw[key] = int(text) if key in ("n", "grid_size") else float(text)
        kw["pivot"] = tuple(float(vals[k]) for k in header if k.startswith("pivot_x"))
        kw.setdefault("wall_time_ms", float("nan"))
        out.append(ConvergenceRecord(**kw))
    return out


# -- subcommands --------------------------------------------------------------

def _emit(out, text):
    if out is not None:
        print(text, file=out)


def cmd_convergence(cfg, csv_path=None, out=None, timing=False):
    """Run, write the trace, print the rate fit and worst bound ratios.  Returns an exit code."""
    rc = cfg.run_config()
    try:
        rc, state, records = run_experiment(cfg)
        warning = None
    except (BreakdownError, NumericalError) as exc:
        records, warning = exc.records, f"breakdown: {exc}"
    if csv_path:
        write_records_csv(csv_path, records, rc.domain.dim, timing, warning)
    if warning:
        _emit(out, f"warning: {warning}")
    hi = cfg.fit_hi or cfg.n_max
    k_max = float(np.max(rc.kernel.diagonal(tensor_grid(rc.domain, rc.grid_points, rc.grid_cap).points)))
    try:
        fit = fit_rate(records, cfg.fit_lo, hi, floor=10 * BREAKDOWN_RTOL * k_max)
        _emit(out, f"rate fit n in [{fit.fit_range[0]}, {fit.fit_range[1]}]: slope={fit.slope:.4f} "
                   f"intercept={fit.intercept:.4f} r2={fit.r_squared:.4f}")
    except ValueError as exc:
        _emit(out, f"rate fit skipped: {exc}")
    code = EXIT_BREAKDOWN if warning else EXIT_OK
    if rc.kernel.has_certified_lipschitz:
        report = check_bounds(rc, records, cfg.refine_delta)
        for line in report.lines():
            _emit(out, line)
        if not report.ok and code == EXIT_OK:
            code = EXIT_VIOLATION
    return code


def cmd_bounds(cfg, csv_path=None, out=None):
    """Run and check all applicable bounds; exit 0 iff none is violated."""
    rc = cfg.run_config()
    if not rc.kernel.has_certified_lipschitz:
        raise ConfigError(f"kernel {rc.kernel.name} has no certified diagonal Lipschitz constant")
    try:
        rc, state, records = run_experiment(cfg)
        warning = None
    except (BreakdownError, NumericalError) as exc:
        records, warning = exc.records, f"breakdown: {exc}"
    if csv_path:
        write_records_csv(csv_path, records, rc.domain.dim, False, warning)
    report = check_bounds(rc, records, cfg.refine_delta)
    _emit(out, f"kernel={rc.kernel.name} {rc.kernel.params} d={rc.domain.dim} strategy={cfg.strategy} "
               f"steps={len(records)} L={rc.kernel.diag_lipschitz:.6g} R={rc.domain.radius:.6g}")
    for line in report.lines():
        _emit(out, line)
    if warning:
        _emit(out, f"warning: {warning}")
        return EXIT_BREAKDOWN
    return EXIT_OK if report.ok else EXIT_VIOLATION


def matrix_trace(A, n_max=None):
    """Rows ``(n, residual_max, bound)`` for complete pivoting on ``A`` (bound is nan at n = 1)."""
    m = A.order
    n_max = m if n_max is None else min(n_max, m)
    G = discrete_lipschitz(A)
    rows = []

    def record(f):
        bound = matrix_bound(m, G, f.rank) if f.rank > 1 else float("nan")
        rows.append((f.rank, residual_max_entry(f, A), bound))

    matrix_pivoted_cholesky(A, n_max, callback=record)
    return G, rows


def cmd_matrix(path, n_max=None, csv_path=None, out=None):
    """Factor the matrix file; exit 2 if ``||A - A_n||_max`` ever exceeds ``4 (m-1) G / (n-1)``."""
    A = SpdMatrix.read(path)
    try:
        G, rows = matrix_trace(A, n_max)
        warning = None
    except BreakdownError as exc:
        G, rows, warning = discrete_lipschitz(A), [], str(exc)
    violations = [n for n, r, b in rows if n > 1 and r > b + BOUND_SLACK * max(1.0, np.max(np.abs(A.entries)))]
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "residual_max", "bound"])
            for n, r, b in rows:
                w.writerow([n, _fmt(r), _fmt(b)])
            if warning:
                fh.write(f"# warning: breakdown: {warning}\n")
    _emit(out, f"m={A.order} G_A={G:.6g} steps={len(rows)} violations={len(violations)}")
    if warning:
        _emit(out, f"warning: breakdown: {warning}")
        return EXIT_BREAKDOWN
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_gp_demo(cfg, csv_path=None, out=None):
    """Fit a GP to a test function at complete-pivoting sites and tabulate it on the grid."""
    rc = cfg.run_config()
    if cfg.function not in TEST_FUNCTIONS:
        raise ConfigError(f"unknown function {cfg.function!r}; choose from {', '.join(TEST_FUNCTIONS)}")
    f = TEST_FUNCTIONS[cfg.function]
    grid = tensor_grid(rc.domain, rc.grid_points, rc.grid_cap)
    state = CholeskyState(rc.kernel, grid)
    while state.n < rc.n_max and state.residual_sup_norm() >= rc.tol:
        state = state.step(select_complete(state))
    sites = state.pivot_points
    gp = GpPosterior(rc.kernel, sites, f(sites))
    X = grid.points
    mean, sd, truth = gp.posterior_mean(X), gp.posterior_sd(X), f(X)
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{i}" for i in range(X.shape[1])] + ["mean", "sd", "true"])
            for x, mu, s, t in zip(X, mean, sd, truth):
                w.writerow([_fmt(v) for v in (*x, mu, s, t)])
    _emit(out, f"sites={state.n} max_abs_error={np.max(np.abs(mean - truth)):.4e} max_sd={np.max(sd):.4e}")
    return EXIT_OK


def cmd_catalog(out=None, dim=1):
    rows = []
    for k in _kernels.build_catalog(dim):
        c11 = k.c11_constants
        c11_text = "-" if c11 is None else f"L={c11.lipschitz:.6g} L0={c11.first_arg:.6g} Kmin={c11.diag_min:.6g}"
        rows.append(f"{k.name:<11} params={k.params} domain=[{k.domain.lower.tolist()}, {k.domain.upper.tolist()}] "
                    f"diag_lipschitz={k.diag_lipschitz:.6g} c11={c11_text}")
    for row in rows:
        _emit(out, row)
    return EXIT_OK
