import numpy as np
import pytest
from scipy import optimize

from pivchol import build_catalog, estimate_diag_lipschitz, make_kernel
from pivchol.kernels import kernel_eval


def test_brownian_value():
    k = make_kernel("brownian", shift=1.0)
    assert kernel_eval(k, [0.0], [0.5]) == 1.0


def test_matern_half_reduces_to_exponential():
    # K_{1/2}(z) = sqrt(pi / 2z) e^-z makes the general formula collapse to exp(-r / ell)
    k = make_kernel("matern", nu=0.5, ell=0.5)
    assert k([0.0], [0.5]) == pytest.approx(np.exp(-1.0), rel=1e-15)
    assert k([0.0], [0.5]) == pytest.approx(0.367879, abs=1e-6)


def test_matern_one_matches_bessel_form():
    from scipy.special import gamma, kv

    nu, ell, r = 1.0, 0.5, 0.3
    z = np.sqrt(2 * nu) * r / ell
    expected = 2 ** (1 - nu) / gamma(nu) * z**nu * kv(nu, z)
    assert make_kernel("matern", nu=nu, ell=ell)([0.0], [r]) == pytest.approx(expected, rel=1e-12)


def test_matern_three_halves_matches_bessel_form():
    from scipy.special import gamma, kv

    nu, ell, r = 1.5, 0.5, 0.37
    z = np.sqrt(2 * nu) * r / ell
    expected = 2 ** (1 - nu) / gamma(nu) * z**nu * kv(nu, z)
    assert make_kernel("matern", nu=nu, ell=ell)([0.1], [0.1 + r]) == pytest.approx(expected, rel=1e-12)


def test_dimension_mismatch_is_rejected():
    k = make_kernel("matern", nu=0.5, ell=0.5, dim=2)
    with pytest.raises(ValueError):
        k([0.0], [0.5])


@pytest.mark.parametrize("name,params", [("matern", {"nu": 0.7}), ("matern", {"ell": -1.0}),
                                          ("gaussian", {"sigma": 0.0}), ("ou", {"alpha": 0.0})])
def test_invalid_parameters(name, params):
    with pytest.raises(ValueError):
        make_kernel(name, **params)


def test_unknown_kernel_and_one_d_only():
    with pytest.raises(ValueError):
        make_kernel("laplace2d")
    with pytest.raises(ValueError):
        make_kernel("green1d", dim=2)


def _sampled_quotient(kernel, n, rng):
    return estimate_diag_lipschitz(kernel, n_pairs=n, rng=rng)


def test_brownian_lipschitz_oracle(rng):
    k = make_kernel("brownian", shift=1.0)
    assert k.diag_lipschitz == 1.0
    est = _sampled_quotient(k, 100_000, rng)
    # difference quotients over offsets near 1e-6 carry ~1e-10 cancellation error
    assert est <= 1.0 + 1e-9
    assert est > 0.99


def test_matern_half_lipschitz_oracle(rng):
    k = make_kernel("matern", nu=0.5, ell=0.5)
    assert k.diag_lipschitz == 2.0
    est = _sampled_quotient(k, 100_000, rng)
    assert 1.99 < est <= 2.0 * (1 + 1e-9)


def test_gaussian_lipschitz_oracle():
    sigma = 0.7
    k = make_kernel("gaussian", sigma=sigma)
    # 1-d maximization of d/dr (1 - exp(-r^2 / 2 sigma^2)) over [0, diam]
    res = optimize.minimize_scalar(lambda r: -(r / sigma**2) * np.exp(-r * r / (2 * sigma**2)),
                                   bounds=(0.0, 2.0), method="bounded", options={"xatol": 1e-12})
    assert k.diag_lipschitz == pytest.approx(-res.fun, rel=1e-9)
    assert k.diag_lipschitz == pytest.approx(np.exp(-0.5) / sigma, rel=1e-15)


def test_ou_lipschitz():
    assert make_kernel("ou", alpha=2.0, ell=1.0).diag_lipschitz == 2.0


@pytest.mark.parametrize("dim", [1, 2])
def test_catalog_certificates(dim, rng):
    for k in build_catalog(dim):
        est = estimate_diag_lipschitz(k, n_pairs=100_000, rng=rng)
        assert est <= k.diag_lipschitz * (1 + 1e-9), k.name


def test_catalog_contents():
    names = [k.name for k in build_catalog(1)]
    for name in ("ou", "matern", "brownian", "green1d", "gaussian", "rational-a", "rational-b"):
        assert name in names
    nus = sorted(k.params["nu"] for k in build_catalog(1) if k.name == "matern")
    assert nus == [0.5, 1.0, 1.5]
    c11 = {(k.name, k.params.get("nu")) for k in build_catalog(1) if k.c11_constants is not None}
    assert c11 == {("matern", 1.5), ("gaussian", None)}


@pytest.mark.parametrize("dim", [1, 2])
def test_catalog_symmetry(dim, rng):
    for k in build_catalog(dim):
        x = k.domain.sample(1000, rng)
        y = k.domain.sample(1000, rng)
        kxy, kyx = k(x, y), k(y, x)
        assert np.all(np.abs(kxy - kyx) <= 1e-14 * (1 + np.abs(kxy))), k.name


@pytest.mark.parametrize("dim", [1, 2])
def test_catalog_psd(dim, rng):
    for k in build_catalog(dim):
        for _ in range(20):
            G = k.matrix(k.domain.sample(30, rng))
            lam = np.linalg.eigvalsh(G)
            assert lam[0] >= -1e-10 * np.max(np.diag(G)), k.name


def test_evaluation_is_pure(rng):
    k = make_kernel("matern", nu=1.0, ell=0.5, dim=2)
    x = k.domain.sample(50, rng)
    assert np.array_equal(k.diagonal(x), k.diagonal(x.copy()))
    assert k([0.2, 0.1], [0.2, 0.1]) == k([0.2, 0.1], [0.2, 0.1]) == 1.0


def test_matrix_column_diagonal_agree(rng):
    k = make_kernel("gaussian", sigma=0.5, dim=2)
    X = k.domain.sample(7, rng)
    G = k.matrix(X)
    np.testing.assert_allclose(G[:, 3], k.column(X, X[3]))
    np.testing.assert_allclose(np.diag(G), k.diagonal(X))
