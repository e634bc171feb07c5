import itertools

import numpy as np
import pytest

from pivchol import (BreakdownError, CholeskyState, Complete, DeltaComplete, Domain, LocalMaxVol, RandomPivots,
                     RunConfig, Uniform, build_catalog, factorize, make_kernel, min_separation, parse_strategy, refine_grid_run,
                     run, select_local_maxvol, tensor_grid)
from pivchol.pivoting import (leave_one_out_diag, select_complete, select_delta_complete, select_random,
                              uniform_pivots)


# -- strategies ---------------------------------------------------------------

def test_parse_strategy():
    assert parse_strategy("complete") == Complete()
    assert parse_strategy("delta:0.5", seed=3) == DeltaComplete(0.5, 3)
    assert parse_strategy("uniform:10") == Uniform(10)
    assert parse_strategy("random:7") == RandomPivots(7)
    assert parse_strategy("maxvol:5") == LocalMaxVol(5)
    assert parse_strategy("random", seed=4) == RandomPivots(4)
    for bad in ("delta:0", "delta:1.5", "maxvol:0", "uniform:x", "rook", "complete:1"):
        with pytest.raises(ValueError):
            parse_strategy(bad)


def test_select_complete_examples(line_grid, matern_half):
    brown = make_kernel("brownian")
    s = CholeskyState(brown, line_grid)
    idx = select_complete(s)
    assert line_grid.points[idx, 0] == 1.0
    s = s.step(idx)
    # maximize (x + 1) - (x + 1)^2 / 2 on the grid: x = 0, value 1/2
    idx2 = select_complete(s)
    assert line_grid.points[idx2, 0] == pytest.approx(0.0, abs=1e-12)
    assert s.diag_residual[idx2] == pytest.approx(0.5, abs=1e-12)
    assert select_complete(CholeskyState(matern_half, line_grid)) == 0


def test_select_complete_breakdown():
    k = make_kernel("matern", nu=0.5, ell=0.5)
    g = tensor_grid(k.domain, 3)
    s = factorize(k, g, [0, 1, 2])
    with pytest.raises(BreakdownError):
        select_complete(s)


def test_delta_one_is_complete(line_grid, matern_half, rng):
    s = factorize(matern_half, line_grid, [0, 2000])
    idx = select_delta_complete(s, 1.0, rng)
    assert s.diag_residual[idx] >= s.max_diag()[1] - 1e-12


def test_delta_small_admits_everything(line_grid, matern_half):
    s = CholeskyState(matern_half, line_grid)
    picks = {select_delta_complete(s, 0.1, np.random.default_rng(i)) for i in range(200)}
    assert len(picks) > 150


def test_delta_replay_log(matern_half):
    g = tensor_grid(matern_half.domain, 501)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        s = CholeskyState(matern_half, g)
        for _ in range(10):
            top = s.max_diag()[1]
            idx = select_delta_complete(s, 0.5, rng)
            assert s.diag_residual[idx] >= 0.5 * top
            s = s.step(idx)


def test_delta_is_seeded(line_grid, matern_half):
    cfg = RunConfig(matern_half, 2001, DeltaComplete(0.5, 11), n_max=20)
    a = run(cfg)[0].pivots
    b = run(cfg)[0].pivots
    assert a == b
    assert run(RunConfig(matern_half, 2001, DeltaComplete(0.5, 12), n_max=20))[0].pivots != a


def test_select_random_exhausts():
    k = make_kernel("matern", nu=0.5, ell=0.5)
    g = tensor_grid(k.domain, 4)
    rng = np.random.default_rng(0)
    s = CholeskyState(k, g)
    while (idx := select_random(s, rng)) is not None:
        s = s.step(idx)
    assert sorted(s.pivots) == [0, 1, 2, 3]


# -- uniform pivots -----------------------------------------------------------

def test_uniform_pivots_are_cell_centres():
    dom = Domain.cube(-1, 1, 1)
    g = tensor_grid(dom, 2001)
    idx = uniform_pivots(g, 10, dom)
    assert sorted(g.points[idx, 0]) == pytest.approx(-1 + 0.1 + 0.2 * np.arange(10))
    assert len(set(idx)) == 10


def test_uniform_pivots_too_coarse():
    g = tensor_grid(Domain.cube(-1, 1, 1), 5)
    with pytest.raises(ValueError):
        uniform_pivots(g, 10)


@pytest.mark.parametrize("dim,m,per_axis", [(1, 2001, 100), (2, 201, 10)])
def test_uniform_strategy_bound(dim, m, per_axis):
    k = make_kernel("matern", nu=0.5, ell=0.5, dim=dim)
    state, records = run(RunConfig(k, m, Uniform(per_axis), n_max=per_axis**dim))
    assert state.n == per_axis**dim
    # unit cube: 2 L sqrt(d) n^(-1/d); a box of widths w scales this to 4 L |w| / (2m)
    L, w = k.diag_lipschitz, k.domain.widths
    last = records[-1]
    assert last.sup_residual <= 4 * L * (np.linalg.norm(w) / (2 * per_axis) + last.eta) + 1e-10


# -- local maximum volume -----------------------------------------------------

def test_maxvol_single_pivot_is_complete(line_grid, matern_half):
    brown = make_kernel("brownian")
    res = select_local_maxvol(CholeskyState(brown, line_grid), 1)
    assert res.pivots == [select_complete(CholeskyState(brown, line_grid))]
    assert res.converged


@pytest.mark.parametrize("kernel", [make_kernel("matern", nu=0.5, ell=0.5), make_kernel("brownian"),
                                    make_kernel("gaussian", sigma=0.5)])
def test_maxvol_exhaustive_pairs(kernel):
    g = tensor_grid(kernel.domain, 5)
    res = select_local_maxvol(CholeskyState(kernel, g), 2)
    dets = {pair: np.linalg.det(kernel.matrix(g.points[list(pair)]))
            for pair in itertools.combinations(range(5), 2)}
    best = max(dets.values())
    assert dets[tuple(sorted(res.pivots))] >= best * (1 - 1e-12)


def test_maxvol_local_optimality():
    k = make_kernel("matern", nu=1.0, ell=0.5)
    g = tensor_grid(k.domain, 401)
    res = select_local_maxvol(CholeskyState(k, g), 15, max_sweeps=50)
    assert res.converged
    s = factorize(k, g, res.pivots)
    loo = leave_one_out_diag(s)
    for row, z in zip(loo, s.pivots):
        assert row.max() <= row[z] * (1 + 1e-10) + 1e-10


def test_maxvol_never_decreases_volume():
    k = make_kernel("matern", nu=1.5, ell=0.5)
    g = tensor_grid(k.domain, 401)
    start = CholeskyState(k, g)
    complete = start
    for _ in range(12):
        complete = complete.step(select_complete(complete))
    res = select_local_maxvol(start, 12)
    logdet = lambda piv: np.linalg.slogdet(k.matrix(g.points[list(piv)]))[1]  # noqa: E731
    assert logdet(res.pivots) >= logdet(complete.pivots) - 1e-9


def test_leave_one_out_matches_refactorization(line_grid, matern_half):
    s = factorize(matern_half, line_grid, [0, 2000, 1000, 400, 1500])
    loo = leave_one_out_diag(s)
    for k in range(s.n):
        rest = [p for i, p in enumerate(s.pivots) if i != k]
        np.testing.assert_allclose(loo[k], factorize(matern_half, line_grid, rest).diag_residual, atol=1e-12)


def test_maxvol_packing_bound_on_fresh_factorization():
    k = make_kernel("matern", nu=0.5, ell=0.5)
    g = tensor_grid(k.domain, 2001)
    res = select_local_maxvol(CholeskyState(k, g), 40)
    s = factorize(k, g, res.pivots)
    assert s.residual_sup_norm() <= 4 * k.diag_lipschitz * min_separation(s.pivot_points) + 1e-10
    assert s.residual_sup_norm() <= 8 * k.diag_lipschitz * k.domain.radius / (40 - 1) + 1e-10


# -- driver -------------------------------------------------------------------

def test_run_complete_bounds(matern_half):
    state, records = run(RunConfig(matern_half, 2001, Complete(), n_max=200))
    assert len(records) == 200
    for r in records:
        assert r.sup_residual <= r.bound_fill + 1e-10
        if r.n > 1:
            assert r.sup_residual <= r.bound_pack + 1e-10
            assert r.sup_residual <= 4 * matern_half.diag_lipschitz * r.min_sep + 1e-10
    assert records[-1].sup_residual == state.residual_sup_norm()


def test_run_single_step(matern_half):
    _, records = run(RunConfig(matern_half, 2001, Complete(), n_max=1))
    assert len(records) == 1
    L, R = matern_half.diag_lipschitz, matern_half.domain.radius
    assert records[0].sup_residual <= 8 * L * R
    assert records[0].bound_pack == 8 * L * R


def test_run_stops_at_tolerance():
    k = make_kernel("gaussian", sigma=1.0)
    state, records = run(RunConfig(k, 2001, Complete(), n_max=100, tol=1e-6))
    assert records[-1].sup_residual < 1e-6
    assert all(r.sup_residual >= 1e-6 for r in records[:-1])


@pytest.mark.parametrize("strategy", ["complete", "delta:0.5", "uniform:50", "random:1", "maxvol:5"])
def test_records_monotone(strategy):
    k = make_kernel("matern", nu=1.0, ell=0.5)
    _, records = run(RunConfig(k, 1001, parse_strategy(strategy, seed=0), n_max=50))
    sups = [r.sup_residual for r in records]
    assert all(b <= a + 1e-14 for a, b in zip(sups, sups[1:]))
    assert [r.n for r in records] == list(range(1, len(records) + 1))


def test_run_breakdown_carries_records():
    k = make_kernel("rational-a")
    with pytest.raises(BreakdownError) as info:
        run(RunConfig(k, 2001, Uniform(100), n_max=100))
    assert len(info.value.records) == 1


def test_run_config_validation(matern_half):
    with pytest.raises(ValueError):
        RunConfig(matern_half, 11, n_max=12)
    with pytest.raises(ValueError):
        RunConfig(matern_half, 11, n_max=0)
    with pytest.raises(ValueError):
        RunConfig(matern_half, 11, domain=Domain.cube(-1, 1, 2))


def test_complete_pivot_value_is_the_max(matern_half):
    _, records = run(RunConfig(matern_half, 2001, Complete(), n_max=30))
    prev = 1.0
    for r in records:
        assert r.pivot_value == pytest.approx(prev, abs=1e-12)
        prev = r.sup_residual


# -- grid refinement ----------------------------------------------------------

def test_refine_maintains_target_delta():
    k = make_kernel("matern", nu=0.5, ell=0.5)
    delta = 0.5
    _, records = refine_grid_run(RunConfig(k, 41, Complete(), n_max=40), delta)
    L = k.diag_lipschitz
    sizes = [r.grid_size for r in records]
    assert sizes == sorted(sizes) and sizes[-1] > 41
    for r in records:
        # pivot_value is the grid max at selection time, on the refined grid
        assert 4 * L * r.eta <= (1 - delta) * r.pivot_value
        if r.n > 1:
            assert r.sup_residual <= 8 * L * k.domain.radius / (delta * (r.n - 1)) + 1e-10


def test_refine_without_refinement_matches_run():
    k = make_kernel("matern", nu=0.5, ell=0.5)
    cfg = RunConfig(k, 2001, Complete(), n_max=20)
    s1, r1 = refine_grid_run(cfg, 0.5)
    s2, r2 = run(cfg)
    assert s1.pivots == s2.pivots
    np.testing.assert_array_equal([r.sup_residual for r in r1], [r.sup_residual for r in r2])


def test_refine_keeps_pivots_on_grid():
    k = make_kernel("matern", nu=0.5, ell=0.5)
    state, records = refine_grid_run(RunConfig(k, 21, Complete(), n_max=15), 0.5)
    pts = state.pivot_points
    assert len({tuple(p) for p in pts}) == 15
    assert state.grid.size == records[-1].grid_size


def test_refine_rejects_bad_delta(matern_half):
    with pytest.raises(ValueError):
        refine_grid_run(RunConfig(matern_half, 11, n_max=5), 1.0)


@pytest.mark.parametrize("dim", [1, 2])
def test_complete_packing_and_fill_decay(dim):
    k = make_kernel("matern", nu=0.5, ell=0.5, dim=dim)
    m = {1: 2001, 2: 101}[dim]
    _, records = run(RunConfig(k, m, Complete(), n_max=60))
    R = k.domain.radius
    for r in records[1:]:
        assert r.min_sep <= 2 * R / (r.n ** (1 / dim) - 1) + 1e-12
        assert r.fill <= 2 * R / (r.n ** (1 / dim) - 1) + r.eta + 1e-12


def test_catalog_kernels_run_in_two_dims():
    for k in build_catalog(2):
        state, records = run(RunConfig(k, 21, Complete(), n_max=15))
        assert records and all(r.sup_residual <= r.bound_fill + 1e-10 for r in records), k.name
